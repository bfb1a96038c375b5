//! Face-flux fields on the fine grid.
//!
//! Face velocities are normal components in the fixed +x / +y orientation,
//! per unit face area. x-faces are indexed by [`FineGrid::xface`], y-faces by
//! [`FineGrid::yface`].

use crate::error::{Error, Result};
use crate::grid::FineGrid;

/// A single-valued normal velocity on every fine face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl FaceFlux {
    pub fn zeros(grid: &FineGrid) -> Self {
        Self {
            ux: vec![0.0; grid.n_xfaces()],
            uy: vec![0.0; grid.n_yfaces()],
        }
    }

    /// Uniform velocity `(vx, vy)` on every face.
    pub fn uniform(grid: &FineGrid, vx: f64, vy: f64) -> Self {
        Self {
            ux: vec![vx; grid.n_xfaces()],
            uy: vec![vy; grid.n_yfaces()],
        }
    }

    /// Net outgoing volumetric rate of every cell.
    pub fn cell_outflow(&self, grid: &FineGrid) -> Vec<f64> {
        let (ax, ay) = (grid.hy(), grid.hx());
        let mut out = vec![0.0; grid.n_cells()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let c = grid.cell(i, j);
                out[c] = ax * (self.ux[grid.xface(i + 1, j)] - self.ux[grid.xface(i, j)])
                    + ay * (self.uy[grid.yface(i, j + 1)] - self.uy[grid.yface(i, j)]);
            }
        }
        out
    }

    /// Per-cell conservation residual `outflow - Q`.
    pub fn divergence_residual(&self, grid: &FineGrid, sources: &[f64]) -> Vec<f64> {
        let mut r = self.cell_outflow(grid);
        for (v, q) in r.iter_mut().zip(sources) {
            *v -= q;
        }
        r
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }

    /// Linear combination `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &FaceFlux, b: f64) -> FaceFlux {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        FaceFlux {
            ux: mix(&self.ux, &other.ux),
            uy: mix(&self.uy, &other.uy),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn to_sided(&self) -> SidedFlux {
        SidedFlux {
            ux_lo: self.ux.clone(),
            ux_hi: self.ux.clone(),
            uy_lo: self.uy.clone(),
            uy_hi: self.uy.clone(),
        }
    }

    /// Velocity magnitude at cell centers from averaged face values.
    pub fn cell_magnitude(&self, grid: &FineGrid) -> Vec<f64> {
        (0..grid.n_cells())
            .map(|c| {
                let (i, j) = grid.cell_coords(c);
                let vx = 0.5 * (self.ux[grid.xface(i, j)] + self.ux[grid.xface(i + 1, j)]);
                let vy = 0.5 * (self.uy[grid.yface(i, j)] + self.uy[grid.yface(i, j + 1)]);
                vx.hypot(vy)
            })
            .collect()
    }
}

/// Face velocities seen from each side of every face. `*_lo` is the value
/// computed in the left (bottom) cell, `*_hi` in the right (top) cell. The
/// two agree except on subdomain interfaces of a multiscale solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SidedFlux {
    pub ux_lo: Vec<f64>,
    pub ux_hi: Vec<f64>,
    pub uy_lo: Vec<f64>,
    pub uy_hi: Vec<f64>,
}

impl SidedFlux {
    pub fn zeros(grid: &FineGrid) -> Self {
        FaceFlux::zeros(grid).to_sided()
    }

    /// Largest difference between the two side values over all faces.
    pub fn max_jump(&self) -> f64 {
        let jx = self
            .ux_lo
            .iter()
            .zip(&self.ux_hi)
            .map(|(a, b)| (a - b).abs());
        let jy = self
            .uy_lo
            .iter()
            .zip(&self.uy_hi)
            .map(|(a, b)| (a - b).abs());
        jx.chain(jy).fold(0.0, f64::max)
    }

    pub fn is_single_valued(&self) -> bool {
        self.max_jump() == 0.0
    }

    /// Average of the two sides.
    pub fn averaged(&self) -> FaceFlux {
        let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        FaceFlux {
            ux: avg(&self.ux_lo, &self.ux_hi),
            uy: avg(&self.uy_lo, &self.uy_hi),
        }
    }

    /// Own-side face velocities of cell `(i, j)` as `[west, east, south, north]`.
    #[inline]
    pub fn cell_faces(&self, grid: &FineGrid, i: usize, j: usize) -> [f64; 4] {
        [
            self.ux_hi[grid.xface(i, j)],
            self.ux_lo[grid.xface(i + 1, j)],
            self.uy_hi[grid.yface(i, j)],
            self.uy_lo[grid.yface(i, j + 1)],
        ]
    }

    /// Net outgoing rate of every cell computed from its own-side values.
    pub fn cell_outflow(&self, grid: &FineGrid) -> Vec<f64> {
        let (ax, ay) = (grid.hy(), grid.hx());
        (0..grid.n_cells())
            .map(|c| {
                let (i, j) = grid.cell_coords(c);
                let [w, e, s, n] = self.cell_faces(grid, i, j);
                ax * (e - w) + ay * (n - s)
            })
            .collect()
    }
}

/// Relative error `‖a − r‖ / ‖r‖`; fails on a zero reference.
fn relative(num: f64, den: f64, what: &str) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::Data(format!(
            "reference {what} has zero norm, relative error undefined"
        )));
    }
    Ok((num / den).sqrt())
}

/// Relative L² pressure error with cell-volume weights. With `zero_mean`
/// both fields are shifted to zero mean first, for problems where the
/// pressure is only defined up to a constant.
pub fn pressure_error(
    grid: &FineGrid,
    approx: &[f64],
    reference: &[f64],
    zero_mean: bool,
) -> Result<f64> {
    let mean = |v: &[f64]| {
        if zero_mean {
            v.iter().sum::<f64>() / v.len() as f64
        } else {
            0.0
        }
    };
    let (ma, mr) = (mean(approx), mean(reference));
    let vol = grid.cell_volume();
    let (mut num, mut den) = (0.0, 0.0);
    for (a, r) in approx.iter().zip(reference) {
        let (a, r) = (a - ma, r - mr);
        num += vol * (a - r) * (a - r);
        den += vol * r * r;
    }
    relative(num, den, "pressure")
}

/// Relative L² error of a face-flux field. Each cell contributes
/// `vol/2 · (u_W² + u_E² + u_S² + u_N²)` from its own-side face values,
/// which is exact for the lowest-order Raviart-Thomas field built on them.
pub fn flux_error(grid: &FineGrid, approx: &SidedFlux, reference: &SidedFlux) -> Result<f64> {
    let half = 0.5 * grid.cell_volume();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let a = approx.cell_faces(grid, i, j);
            let r = reference.cell_faces(grid, i, j);
            for k in 0..4 {
                num += half * (a[k] - r[k]) * (a[k] - r[k]);
                den += half * r[k] * r[k];
            }
        }
    }
    relative(num, den, "flux")
}

/// Relative L¹ error of a cell field (saturation).
pub fn relative_l1(approx: &[f64], reference: &[f64]) -> Result<f64> {
    let num: f64 = approx
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs())
        .sum();
    let den: f64 = reference.iter().map(|r| r.abs()).sum();
    if !(den > 0.0) {
        return Err(Error::Data("reference saturation has zero L1 norm".into()));
    }
    Ok(num / den)
}
