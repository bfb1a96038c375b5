//! Conservative downscaling of a multiscale velocity by strip solves around
//! the skeleton.
//!
//! Each interface gets a strip of cells `thickness` deep on both sides. The
//! strip is solved as a pure Neumann problem with data taken from the
//! current velocity on its outer boundary, and the velocity on faces inside
//! the strip is replaced. Vertical interfaces are processed first, then
//! horizontal ones; strips within one sweep are disjoint and run in parallel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::{FaceFlux, SidedFlux};
use crate::grid::{CellBlock, Discretization, FineGrid, Interface, Orientation, Side};
use crate::subdomain_solver::{BlockOperator, BlockRhs, FaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    /// Cells on each side of the interface.
    pub thickness: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { thickness: 2 }
    }
}

impl PatchConfig {
    pub fn validate(&self, disc: &Discretization) -> Result<()> {
        let d = &disc.decomposition;
        if self.thickness == 0 {
            return Err(Error::Config("patch thickness must be at least 1".into()));
        }
        let fits = |cells: usize, count: usize| count == 1 || 2 * self.thickness <= cells;
        if !fits(d.sub_nx, d.mx) || !fits(d.sub_ny, d.my) {
            return Err(Error::Config(format!(
                "patch thickness {} does not fit in {}x{}-cell subdomains",
                self.thickness, d.sub_nx, d.sub_ny
            )));
        }
        Ok(())
    }

    /// Strip depth on one side relative to the subdomain size.
    pub fn relative_thickness(&self, disc: &Discretization) -> f64 {
        let d = &disc.decomposition;
        self.thickness as f64 / d.sub_nx.min(d.sub_ny) as f64
    }
}

/// Face identified by orientation and global index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Face {
    X(usize),
    Y(usize),
}

struct Workspace<'a> {
    grid: &'a FineGrid,
    sided: &'a SidedFlux,
    current: FaceFlux,
    settled_x: Vec<bool>,
    settled_y: Vec<bool>,
}

impl Workspace<'_> {
    /// Velocity on a strip boundary face seen from the strip cell.
    fn boundary_value(&self, face: Face, strip_on_hi_side: bool) -> f64 {
        match face {
            Face::X(f) if self.settled_x[f] => self.current.ux[f],
            Face::Y(f) if self.settled_y[f] => self.current.uy[f],
            Face::X(f) if strip_on_hi_side => self.sided.ux_hi[f],
            Face::X(f) => self.sided.ux_lo[f],
            Face::Y(f) if strip_on_hi_side => self.sided.uy_hi[f],
            Face::Y(f) => self.sided.uy_lo[f],
        }
    }
}

fn strip_block(it: &Interface, t: usize) -> CellBlock {
    match it.orientation {
        Orientation::Vertical => CellBlock {
            i0: it.line - t,
            j0: it.start,
            nx: 2 * t,
            ny: it.len,
        },
        Orientation::Horizontal => CellBlock {
            i0: it.start,
            j0: it.line - t,
            nx: it.len,
            ny: 2 * t,
        },
    }
}

/// Global face and domain-boundary flag of face `l` on `side` of `block`.
fn side_face(grid: &FineGrid, block: &CellBlock, side: Side, l: usize) -> (Face, bool) {
    let (i1, j1) = (block.i0 + block.nx, block.j0 + block.ny);
    match side {
        Side::West => (Face::X(grid.xface(block.i0, block.j0 + l)), block.i0 == 0),
        Side::East => (Face::X(grid.xface(i1, block.j0 + l)), i1 == grid.nx()),
        Side::South => (Face::Y(grid.yface(block.i0 + l, block.j0)), block.j0 == 0),
        Side::North => (Face::Y(grid.yface(block.i0 + l, j1)), j1 == grid.ny()),
    }
}

fn side_count(block: &CellBlock, side: Side) -> usize {
    match side {
        Side::West | Side::East => block.ny,
        Side::South | Side::North => block.nx,
    }
}

fn side_cell(block: &CellBlock, side: Side, l: usize) -> (usize, usize) {
    match side {
        Side::West => (0, l),
        Side::East => (block.nx - 1, l),
        Side::South => (l, 0),
        Side::North => (l, block.ny - 1),
    }
}

/// Solve one strip and return the new velocities on its interior faces.
fn solve_strip(
    ws: &Workspace<'_>,
    kappa: &[f64],
    sources: &[f64],
    block: CellBlock,
) -> Result<Vec<(Face, f64)>> {
    let grid = ws.grid;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut rhs = BlockRhs::zeros(&block);
    for j in 0..block.ny {
        for i in 0..block.nx {
            rhs.sources[block.local(i, j)] = sources[block.global(grid, i, j)];
        }
    }
    // Outward Neumann data, plus transmissibility weights for the defect
    // correction on faces away from the domain boundary.
    let mut weights: [Vec<f64>; 4] = Default::default();
    let mut net_out = 0.0;
    let mut scale = 0.0;
    for side in Side::ALL {
        let (area, h) = match side {
            Side::West | Side::East => (hy, hx),
            Side::South | Side::North => (hx, hy),
        };
        let strip_on_hi = matches!(side, Side::West | Side::South);
        for l in 0..side_count(&block, side) {
            let (face, on_boundary) = side_face(grid, &block, side, l);
            let z = side.outward_sign() * ws.boundary_value(face, strip_on_hi);
            rhs.side_values[side.index()][l] = z;
            net_out += z * area;
            scale += (z * area).abs();
            let (i, j) = side_cell(&block, side, l);
            let k = kappa[block.global(grid, i, j)];
            weights[side.index()].push(if on_boundary { 0.0 } else { area * 2.0 * k / h });
        }
    }
    let q_total: f64 = rhs.sources.iter().sum();
    scale += rhs.sources.iter().map(|q| q.abs()).sum::<f64>();
    let defect = net_out - q_total;
    if defect.abs() > 1e-6 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Downscale(format!(
            "strip at cells ({}, {}) has incompatible Neumann data: defect {defect:.3e}, scale {scale:.3e}",
            block.i0, block.j0
        )));
    }
    let w_total: f64 = weights.iter().flatten().sum();
    if w_total > 0.0 {
        for side in Side::ALL {
            let area = match side {
                Side::West | Side::East => hy,
                Side::South | Side::North => hx,
            };
            for (z, w) in rhs.side_values[side.index()]
                .iter_mut()
                .zip(&weights[side.index()])
            {
                *z -= defect * w / w_total / area;
            }
        }
    }
    let kinds = Side::ALL.map(|s| vec![FaceKind::Neumann; side_count(&block, s)]);
    let op = BlockOperator::new(grid, block, kappa, kinds)?;
    let sol = op.solve(&rhs)?;
    let mut out = Vec::with_capacity(2 * block.n_cells());
    for j in 0..block.ny {
        for i in 1..block.nx {
            out.push((
                Face::X(grid.xface(block.i0 + i, block.j0 + j)),
                sol.ux[sol.xface(i, j)],
            ));
        }
    }
    for j in 1..block.ny {
        for i in 0..block.nx {
            out.push((
                Face::Y(grid.yface(block.i0 + i, block.j0 + j)),
                sol.uy[sol.yface(i, j)],
            ));
        }
    }
    Ok(out)
}

/// Turn a sided multiscale velocity into a single-valued, cellwise
/// conservative one. `kappa` is the effective (mobility-weighted)
/// permeability per cell and `sources` the per-cell rates.
pub fn stitch(
    disc: &Discretization,
    kappa: &[f64],
    sources: &[f64],
    flux: &SidedFlux,
    cfg: PatchConfig,
) -> Result<FaceFlux> {
    let grid = &disc.grid;
    if kappa.len() != grid.n_cells() || sources.len() != grid.n_cells() {
        return Err(Error::Contract(
            "permeability or source vector does not match the grid".into(),
        ));
    }
    if flux.ux_lo.len() != grid.n_xfaces() || flux.uy_lo.len() != grid.n_yfaces() {
        return Err(Error::Contract("flux field does not match the grid".into()));
    }
    cfg.validate(disc)?;
    let mut ws = Workspace {
        grid,
        sided: flux,
        current: FaceFlux {
            ux: flux.ux_lo.clone(),
            uy: flux.uy_lo.clone(),
        },
        settled_x: vec![true; grid.n_xfaces()],
        settled_y: vec![true; grid.n_yfaces()],
    };
    for it in &disc.skeleton.interfaces {
        for l in 0..it.len {
            let f = it.edge_face(grid, l);
            match it.orientation {
                Orientation::Vertical => ws.settled_x[f] = false,
                Orientation::Horizontal => ws.settled_y[f] = false,
            }
        }
    }
    for orientation in [Orientation::Vertical, Orientation::Horizontal] {
        let strips: Vec<CellBlock> = disc
            .skeleton
            .interfaces
            .iter()
            .filter(|it| it.orientation == orientation)
            .map(|it| strip_block(it, cfg.thickness))
            .collect();
        let updates = strips
            .par_iter()
            .map(|b| solve_strip(&ws, kappa, sources, *b))
            .collect::<Result<Vec<_>>>()?;
        for (face, v) in updates.into_iter().flatten() {
            match face {
                Face::X(f) => {
                    ws.current.ux[f] = v;
                    ws.settled_x[f] = true;
                }
                Face::Y(f) => {
                    ws.current.uy[f] = v;
                    ws.settled_y[f] = true;
                }
            }
        }
    }
    debug_assert!(ws.settled_x.iter().chain(&ws.settled_y).all(|s| *s));
    Ok(ws.current)
}

/// Largest cellwise conservation residual relative to the largest face rate.
pub fn relative_divergence_residual(grid: &FineGrid, flux: &FaceFlux, sources: &[f64]) -> f64 {
    let area = grid.hx().max(grid.hy());
    let scale = (flux.max_abs() * area)
        .max(sources.iter().fold(0.0, |m: f64, q| m.max(q.abs())))
        .max(f64::MIN_POSITIVE);
    flux.divergence_residual(grid, sources)
        .iter()
        .fold(0.0, |m: f64, r| m.max(r.abs()))
        / scale
}
