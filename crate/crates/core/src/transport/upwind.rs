use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::FluidModel;
use crate::flux::FaceFlux;
use crate::grid::FineGrid;
use crate::subdomain_solver::BoundarySpec;

/// Overshoot beyond `[0, 1]` that is still attributed to round-off.
pub const BOUND_SLACK: f64 = 1e-10;

/// Water entering and leaving the domain during one step (volumes).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WaterBudget {
    pub injected: f64,
    pub produced: f64,
}

impl WaterBudget {
    pub fn add(&mut self, other: WaterBudget) {
        self.injected += other.injected;
        self.produced += other.produced;
    }
}

fn frac(fluid: &FluidModel, s: f64) -> f64 {
    fluid.fractional_flow_unchecked(s.clamp(0.0, 1.0))
}

/// Total outgoing volumetric rate of every cell, sinks included.
pub fn cell_outgoing_rates(grid: &FineGrid, flux: &FaceFlux, sources: &[f64]) -> Vec<f64> {
    let (ax, ay) = (grid.hy(), grid.hx());
    (0..grid.n_cells())
        .map(|c| {
            let (i, j) = grid.cell_coords(c);
            ax * ((-flux.ux[grid.xface(i, j)]).max(0.0) + flux.ux[grid.xface(i + 1, j)].max(0.0))
                + ay * ((-flux.uy[grid.yface(i, j)]).max(0.0)
                    + flux.uy[grid.yface(i, j + 1)].max(0.0))
                + (-sources[c]).max(0.0)
        })
        .collect()
}

/// Largest stable transport step `cfl · vol / (max|f'| · outgoing rate)`,
/// or `None` when nothing flows.
pub fn cfl_timestep(
    grid: &FineGrid,
    flux: &FaceFlux,
    sources: &[f64],
    fluid: &FluidModel,
    cfl: f64,
) -> Option<f64> {
    let peak = cell_outgoing_rates(grid, flux, sources)
        .into_iter()
        .fold(0.0, f64::max);
    let slope = fluid.max_fractional_flow_slope();
    (peak > 0.0 && slope > 0.0).then(|| cfl * grid.cell_volume() / (slope * peak))
}

/// Volumetric rate entering through inflow faces and injectors.
pub fn inflow_rate(grid: &FineGrid, flux: &FaceFlux, sources: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ax, ay) = (grid.hy(), grid.hx());
    let mut rate: f64 = sources.iter().filter(|q| **q > 0.0).sum();
    for j in 0..ny {
        rate += ax * (flux.ux[grid.xface(0, j)].max(0.0) + (-flux.ux[grid.xface(nx, j)]).max(0.0));
    }
    for i in 0..nx {
        rate += ay * (flux.uy[grid.yface(i, 0)].max(0.0) + (-flux.uy[grid.yface(i, ny)]).max(0.0));
    }
    rate
}

/// Pore volumes injected during `dt` (unit porosity).
pub fn pvi_increment(grid: &FineGrid, flux: &FaceFlux, sources: &[f64], dt: f64) -> f64 {
    dt * inflow_rate(grid, flux, sources) / grid.domain_volume()
}

/// One explicit first-order upwind step. Inflow faces and injectors carry
/// `f(s̄)`, everything else the fractional flow of the upwind cell.
pub fn upwind_step(
    grid: &FineGrid,
    s: &[f64],
    flux: &FaceFlux,
    dt: f64,
    bspec: &BoundarySpec,
    fluid: &FluidModel,
) -> Result<(Vec<f64>, WaterBudget)> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if s.len() != grid.n_cells() || flux.ux.len() != grid.n_xfaces() {
        return Err(Error::Contract(
            "saturation or flux does not match the grid".into(),
        ));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::Contract(format!("invalid transport step {dt}")));
    }
    let f_in = frac(fluid, bspec.inflow_saturation);
    let (ax, ay) = (grid.hy(), grid.hx());
    let mut budget = WaterBudget::default();
    // Water rate through every face in the +x / +y direction.
    let mut wx = vec![0.0; grid.n_xfaces()];
    for j in 0..ny {
        for i in 0..=nx {
            let u = flux.ux[grid.xface(i, j)];
            let f = if u > 0.0 {
                if i == 0 {
                    f_in
                } else {
                    frac(fluid, s[grid.cell(i - 1, j)])
                }
            } else if i == nx {
                f_in
            } else {
                frac(fluid, s[grid.cell(i, j)])
            };
            let w = ax * u * f;
            wx[grid.xface(i, j)] = w;
            if i == 0 {
                if w > 0.0 {
                    budget.injected += w;
                } else {
                    budget.produced -= w;
                }
            } else if i == nx {
                if w > 0.0 {
                    budget.produced += w;
                } else {
                    budget.injected -= w;
                }
            }
        }
    }
    let mut wy = vec![0.0; grid.n_yfaces()];
    for j in 0..=ny {
        for i in 0..nx {
            let u = flux.uy[grid.yface(i, j)];
            let f = if u > 0.0 {
                if j == 0 {
                    f_in
                } else {
                    frac(fluid, s[grid.cell(i, j - 1)])
                }
            } else if j == ny {
                f_in
            } else {
                frac(fluid, s[grid.cell(i, j)])
            };
            let w = ay * u * f;
            wy[grid.yface(i, j)] = w;
            if j == 0 {
                if w > 0.0 {
                    budget.injected += w;
                } else {
                    budget.produced -= w;
                }
            } else if j == ny {
                if w > 0.0 {
                    budget.produced += w;
                } else {
                    budget.injected -= w;
                }
            }
        }
    }
    let well = |c: usize| {
        let q = bspec.sources[c];
        if q > 0.0 {
            q * f_in
        } else {
            q * frac(fluid, s[c])
        }
    };
    for c in 0..grid.n_cells() {
        let w = well(c);
        if w > 0.0 {
            budget.injected += w;
        } else {
            budget.produced -= w;
        }
    }
    let factor = dt / grid.cell_volume();
    let next: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j) = grid.cell_coords(c);
            let out = wx[grid.xface(i + 1, j)] - wx[grid.xface(i, j)] + wy[grid.yface(i, j + 1)]
                - wy[grid.yface(i, j)];
            s[c] - factor * (out - well(c))
        })
        .collect();
    if let Some((c, v)) = next
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= -BOUND_SLACK && **v <= 1.0 + BOUND_SLACK))
    {
        return Err(Error::StepRejected(format!(
            "saturation {v} in cell {c} after a step of {dt:e}; CFL condition violated"
        )));
    }
    budget.injected *= dt;
    budget.produced *= dt;
    Ok((next, budget))
}
