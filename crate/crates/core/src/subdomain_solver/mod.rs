//! Fine-scale two-point flux solves on subdomains with Dirichlet, Neumann
//! and Robin conditions, and the multiscale basis responses built from them.

mod boundary;
mod tpfa;

pub use boundary::{BoundarySpec, FaceBc};
pub(crate) use tpfa::{side_cell, side_len};
pub use tpfa::{BlockOperator, BlockRhs, FaceKind, LocalSolution};

use crate::error::{Error, Result};
use crate::grid::{CellBlock, Discretization, FineGrid, Side, SideKind, Subdomain};
use crate::spaces::InterfaceSpaces;

/// Robin data on one interface side of a subdomain, one entry per fine edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinSide {
    /// `β = α H / κ` with `κ` of the adjacent inside cell.
    pub beta: Vec<f64>,
    /// Right-hand trace `r = −β U_H (ň·ň^i) + P_H`.
    pub trace: Vec<f64>,
}

/// Robin data for the interface sides of a subdomain, indexed by [`Side::index`].
pub type RobinData = [Option<RobinSide>; 4];

/// Boundary face kind and value of global face `l` on `side` of `block`,
/// which must lie on the outer boundary.
fn outer_face(block: &CellBlock, bspec: &BoundarySpec, side: Side, l: usize) -> (FaceKind, f64) {
    let global_l = match side {
        Side::West | Side::East => block.j0 + l,
        Side::South | Side::North => block.i0 + l,
    };
    match bspec.face(side, global_l) {
        FaceBc::Pressure(g) => (FaceKind::Dirichlet, g),
        FaceBc::Flux(z) => (FaceKind::Neumann, z),
    }
}

/// `β` per edge on each interface side of `sub`. `alpha[k][l]` is the Robin
/// `α` of edge `l` of interface `k`.
pub fn robin_betas(
    grid: &FineGrid,
    coarse_size: f64,
    sub: &Subdomain,
    kappa: &[f64],
    alpha: &[Vec<f64>],
) -> [Option<Vec<f64>>; 4] {
    Side::ALL.map(|side| match sub.sides[side.index()] {
        SideKind::Boundary => None,
        SideKind::Interface { id, .. } => Some(
            (0..side_len(&sub.cells, side))
                .map(|l| {
                    let (i, j) = side_cell(&sub.cells, side, l);
                    alpha[id][l] * coarse_size / kappa[sub.cells.global(grid, i, j)]
                })
                .collect(),
        ),
    })
}

fn subdomain_kinds(
    sub: &Subdomain,
    bspec: &BoundarySpec,
    betas: &[Option<Vec<f64>>; 4],
) -> [Vec<FaceKind>; 4] {
    Side::ALL.map(|side| match &betas[side.index()] {
        Some(b) => b.iter().map(|&beta| FaceKind::Robin(beta)).collect(),
        None => (0..side_len(&sub.cells, side))
            .map(|l| outer_face(&sub.cells, bspec, side, l).0)
            .collect(),
    })
}

/// Right-hand side with the true boundary data and sources and zero Robin traces.
fn particular_rhs(grid: &FineGrid, sub: &Subdomain, bspec: &BoundarySpec) -> BlockRhs {
    let b = &sub.cells;
    let mut rhs = BlockRhs::zeros(b);
    for side in Side::ALL {
        if sub.sides[side.index()] == SideKind::Boundary {
            for l in 0..side_len(b, side) {
                rhs.side_values[side.index()][l] = outer_face(b, bspec, side, l).1;
            }
        }
    }
    for j in 0..b.ny {
        for i in 0..b.nx {
            rhs.sources[b.local(i, j)] = bspec.sources[b.global(grid, i, j)];
        }
    }
    rhs
}

/// Solve the local problem on `sub` with the global boundary data on its
/// outer sides and the given Robin data on its interface sides.
pub fn local_solve(
    grid: &FineGrid,
    sub: &Subdomain,
    kappa: &[f64],
    bspec: &BoundarySpec,
    robin: &RobinData,
) -> Result<LocalSolution> {
    let mut betas: [Option<Vec<f64>>; 4] = Default::default();
    for side in Side::ALL {
        let is_interface = matches!(sub.sides[side.index()], SideKind::Interface { .. });
        match (&robin[side.index()], is_interface) {
            (Some(r), true) => betas[side.index()] = Some(r.beta.clone()),
            (None, false) => {}
            _ => {
                return Err(Error::Contract(format!(
                    "Robin data on {side:?} side of subdomain {} does not match its interfaces",
                    sub.index
                )))
            }
        }
    }
    let op = BlockOperator::new(grid, sub.cells, kappa, subdomain_kinds(sub, bspec, &betas))?;
    let mut rhs = particular_rhs(grid, sub, bspec);
    for side in Side::ALL {
        if let Some(r) = &robin[side.index()] {
            rhs.side_values[side.index()].clone_from(&r.trace);
        }
    }
    op.solve(&rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Flux,
    Pressure,
}

/// One interface basis function: `index`-th function of the `unknown` space on `interface`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofRef {
    pub interface: usize,
    pub unknown: Unknown,
    pub index: usize,
}

/// Local responses of one subdomain: the particular solution and one
/// solution per basis function of each adjacent interface.
#[derive(Debug)]
pub struct BasisResponses {
    pub subdomain: usize,
    pub betas: [Option<Vec<f64>>; 4],
    /// Half-cell resistance `h⊥ / (2κ)` of the inside cell on each interface edge.
    pub halves: [Option<Vec<f64>>; 4],
    pub particular: LocalSolution,
    pub responses: Vec<(DofRef, LocalSolution)>,
    operator: BlockOperator,
    /// Right-hand sides: the particular one first, then one per response.
    rhs: Vec<BlockRhs>,
}

impl BasisResponses {
    /// The local solution for interface coefficients `coef` (one per
    /// response). Solved from the combined data rather than summed, so the
    /// fluxes stay conservative to round-off.
    pub fn combine(&self, coef: &[f64]) -> Result<LocalSolution> {
        if coef.len() != self.responses.len() {
            return Err(Error::Contract(format!(
                "{} coefficients for {} basis responses",
                coef.len(),
                self.responses.len()
            )));
        }
        let mut total = self.rhs[0].clone();
        for (c, r) in coef.iter().zip(&self.rhs[1..]) {
            for (a, b) in total.side_values.iter_mut().zip(&r.side_values) {
                a.iter_mut().zip(b).for_each(|(a, b)| *a += c * b);
            }
            total
                .sources
                .iter_mut()
                .zip(&r.sources)
                .for_each(|(a, b)| *a += c * b);
        }
        self.operator.solve(&total)
    }
}

/// Factorize the subdomain operator once and solve for every interface
/// basis function plus the particular solution.
pub fn compute_basis_responses(
    disc: &Discretization,
    sub: &Subdomain,
    spaces: &InterfaceSpaces,
    alpha: &[Vec<f64>],
    kappa: &[f64],
    bspec: &BoundarySpec,
) -> Result<BasisResponses> {
    let grid = &disc.grid;
    let betas = robin_betas(grid, disc.decomposition.coarse_size, sub, kappa, alpha);
    let op = BlockOperator::new(grid, sub.cells, kappa, subdomain_kinds(sub, bspec, &betas))?;
    let halves = Side::ALL.map(|side| {
        betas[side.index()].as_ref().map(|b| {
            let h = match side {
                Side::West | Side::East => grid.hx(),
                Side::South | Side::North => grid.hy(),
            };
            (0..b.len())
                .map(|l| {
                    let (i, j) = side_cell(&sub.cells, side, l);
                    h / (2.0 * kappa[sub.cells.global(grid, i, j)])
                })
                .collect()
        })
    });

    let mut rhs = vec![particular_rhs(grid, sub, bspec)];
    let mut dofs = Vec::new();
    for (side, id, sign) in sub.interfaces() {
        let beta = betas[side.index()].as_ref().unwrap();
        for (unknown, space) in [
            (Unknown::Flux, &spaces.flux[id]),
            (Unknown::Pressure, &spaces.pressure[id]),
        ] {
            for (index, f) in space.functions.iter().enumerate() {
                if f.len() != beta.len() || f.iter().all(|v| *v == 0.0) {
                    return Err(Error::Contract(format!(
                        "interface {id} basis function {index} is empty or has the wrong length"
                    )));
                }
                let mut r = BlockRhs::zeros(&sub.cells);
                r.side_values[side.index()] = match unknown {
                    Unknown::Flux => f.iter().zip(beta).map(|(v, b)| -b * sign * v).collect(),
                    Unknown::Pressure => f.clone(),
                };
                rhs.push(r);
                dofs.push(DofRef {
                    interface: id,
                    unknown,
                    index,
                });
            }
        }
    }
    let mut solutions = op.solve_many(&rhs)?.into_iter();
    let particular = solutions.next().unwrap();
    Ok(BasisResponses {
        subdomain: sub.index,
        betas,
        halves,
        particular,
        responses: dofs.into_iter().zip(solutions).collect(),
        operator: op,
        rhs,
    })
}
