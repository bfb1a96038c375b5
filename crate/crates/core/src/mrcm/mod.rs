//! Global interface problem, multiscale reconstruction and the monolithic
//! fine-grid reference.

mod preset;

pub use preset::{MethodPreset, MHM_ALPHA, MMMFEM_ALPHA};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::PermeabilityField;
use crate::flux::{flux_error, pressure_error, SidedFlux};
use crate::grid::{CellBlock, Discretization, FineGrid, Orientation, Side};
use crate::linalg::{GeneralFactor, TripletBuilder};
use crate::spaces::{
    assemble_spaces, classify, ClassifierConfig, InterfaceClassification, InterfaceSpaces,
    SpaceScheme,
};
use crate::subdomain_solver::{
    compute_basis_responses, BasisResponses, BlockOperator, BlockRhs, BoundarySpec, DofRef, FaceBc,
    FaceKind, LocalSolution, Unknown,
};

/// Pressure and sided face velocities on the whole fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub pressure: Vec<f64>,
    pub flux: SidedFlux,
}

/// Coefficients of `U_H` and `P_H` in the interface bases, per interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSolution {
    pub flux: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MultiscaleSolution {
    pub field: FlowField,
    pub interface: InterfaceSolution,
    /// Set when the boundary data fix no pressure: the mean cell pressure
    /// of the returned field, i.e. the shift to a zero-mean gauge.
    pub gauge_shift: Option<f64>,
}

const OUTER_REFINE_STEPS: usize = 2;

/// Global dof numbering: per interface, flux coefficients then pressure coefficients.
#[derive(Debug, Clone)]
struct DofLayout {
    flux_offset: Vec<usize>,
    pressure_offset: Vec<usize>,
    n: usize,
}

impl DofLayout {
    fn new(spaces: &InterfaceSpaces) -> Self {
        let mut flux_offset = Vec::with_capacity(spaces.n_interfaces());
        let mut pressure_offset = Vec::with_capacity(spaces.n_interfaces());
        let mut n = 0;
        for (u, p) in spaces.flux.iter().zip(&spaces.pressure) {
            flux_offset.push(n);
            n += u.dim();
            pressure_offset.push(n);
            n += p.dim();
        }
        Self {
            flux_offset,
            pressure_offset,
            n,
        }
    }

    fn index(&self, interface: usize, unknown: Unknown, j: usize) -> usize {
        match unknown {
            Unknown::Flux => self.flux_offset[interface] + j,
            Unknown::Pressure => self.pressure_offset[interface] + j,
        }
    }
}

/// Per-cell `κ = λ K`.
pub fn effective_permeability(
    field: &PermeabilityField,
    mobility: Option<&[f64]>,
) -> Result<Vec<f64>> {
    match mobility {
        None => Ok(field.values().to_vec()),
        Some(m) if m.len() == field.values().len() => {
            let k: Vec<f64> = field.values().iter().zip(m).map(|(k, l)| k * l).collect();
            if k.iter().all(|v| v.is_finite() && *v > 0.0) {
                Ok(k)
            } else {
                Err(Error::Contract(
                    "mobility must be positive and finite".into(),
                ))
            }
        }
        Some(m) => Err(Error::Contract(format!(
            "mobility has {} values, field has {}",
            m.len(),
            field.values().len()
        ))),
    }
}

/// Multiscale solver with interface spaces and `α` fixed from the absolute
/// permeability; repeated solves may change mobility and boundary data.
#[derive(Debug, Clone)]
pub struct MrcmSolver<'a> {
    disc: &'a Discretization,
    field: &'a PermeabilityField,
    preset: MethodPreset,
    scheme: SpaceScheme,
    classification: InterfaceClassification,
    spaces: InterfaceSpaces,
    alpha: Vec<Vec<f64>>,
    layout: DofLayout,
}

impl<'a> MrcmSolver<'a> {
    pub fn new(
        disc: &'a Discretization,
        field: &'a PermeabilityField,
        preset: MethodPreset,
        scheme: SpaceScheme,
        cutoffs: &ClassifierConfig,
    ) -> Result<Self> {
        preset.validate()?;
        cutoffs.validate()?;
        if !field.matches(&disc.grid) {
            return Err(Error::Contract(
                "permeability field does not match the grid".into(),
            ));
        }
        let classification = classify(&disc.grid, field, &disc.skeleton, cutoffs);
        let spaces = assemble_spaces(
            &disc.skeleton,
            &classification,
            scheme,
            preset.pbs_targets(),
        )?;
        let alpha = preset.alpha_field(&classification);
        let layout = DofLayout::new(&spaces);
        Ok(Self {
            disc,
            field,
            preset,
            scheme,
            classification,
            spaces,
            alpha,
            layout,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    pub fn preset(&self) -> MethodPreset {
        self.preset
    }

    pub fn scheme(&self) -> SpaceScheme {
        self.scheme
    }

    pub fn classification(&self) -> &InterfaceClassification {
        &self.classification
    }

    pub fn spaces(&self) -> &InterfaceSpaces {
        &self.spaces
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n
    }

    /// Solve with mobility `λ` per cell (`None` for single phase).
    pub fn solve(
        &self,
        mobility: Option<&[f64]>,
        bspec: &BoundarySpec,
    ) -> Result<MultiscaleSolution> {
        let grid = &self.disc.grid;
        bspec.validate(grid)?;
        let kappa = effective_permeability(self.field, mobility)?;
        let responses: Vec<BasisResponses> = self
            .disc
            .decomposition
            .subdomains
            .par_iter()
            .map(|sub| {
                compute_basis_responses(self.disc, sub, &self.spaces, &self.alpha, &kappa, bspec)
            })
            .collect::<Result<_>>()?;

        let (matrix, rhs) = self.assemble(&responses);
        let mut matrix = matrix;
        let mut rhs = rhs;
        let pinned = !bspec.fixes_pressure() && self.layout.n > 0;
        if pinned {
            self.apply_gauge(&mut matrix, &mut rhs);
        }
        let factor = GeneralFactor::new(&matrix)?;
        let mut x = factor.solve(&rhs)?;
        let mut local = self.reconstruct(&responses, &x)?;
        // The assembled columns lose digits to cancellation when Robin faces
        // have tiny resistance; refine against the equations evaluated on
        // the reconstructed local solutions.
        for _ in 0..OUTER_REFINE_STEPS {
            let r = self.interface_residual(&responses, &local, &x, pinned);
            let d = factor.solve(&r)?;
            x.iter_mut().zip(&d).for_each(|(x, d)| *x -= d);
            local = self.reconstruct(&responses, &x)?;
        }
        let interface = InterfaceSolution {
            flux: (0..self.spaces.n_interfaces())
                .map(|k| {
                    let o = self.layout.flux_offset[k];
                    x[o..o + self.spaces.flux[k].dim()].to_vec()
                })
                .collect(),
            pressure: (0..self.spaces.n_interfaces())
                .map(|k| {
                    let o = self.layout.pressure_offset[k];
                    x[o..o + self.spaces.pressure[k].dim()].to_vec()
                })
                .collect(),
        };

        let mut field = FlowField {
            pressure: vec![0.0; grid.n_cells()],
            flux: SidedFlux::zeros(grid),
        };
        for sol in &local {
            scatter(grid, sol, &mut field);
        }
        let gauge_shift =
            pinned.then(|| field.pressure.iter().sum::<f64>() / field.pressure.len() as f64);
        if field.pressure.iter().any(|p| !p.is_finite()) {
            return Err(Error::Solver(
                "multiscale reconstruction is not finite".into(),
            ));
        }
        Ok(MultiscaleSolution {
            field,
            interface,
            gauge_shift,
        })
    }

    /// Rows: flux-dof rows test the β-weighted Robin mismatch
    /// `β (u·ň − U_H)` against the flux basis; pressure-dof rows test the
    /// flux jump against the pressure basis.
    ///
    /// On edges where `β` exceeds the half-cell resistance the mismatch is
    /// evaluated through the equivalent form `ň·ň^i (p_trace − P_H)`, which
    /// avoids cancellation between `u·ň` and `U_H` when `β` is large.
    fn assemble(&self, responses: &[BasisResponses]) -> (TripletBuilder, Vec<f64>) {
        let layout = &self.layout;
        let mut a = TripletBuilder::new(layout.n);
        let mut rhs = vec![0.0; layout.n];
        for r in responses {
            let sub = &self.disc.decomposition.subdomains[r.subdomain];
            for (side, id, sign) in sub.interfaces() {
                let beta = r.betas[side.index()].as_ref().unwrap();
                let half = r.halves[side.index()].as_ref().unwrap();
                let trace_form: Vec<bool> = beta.iter().zip(half).map(|(b, h)| b > h).collect();
                let e = self.disc.skeleton.interfaces[id].edge_length;
                let phi = &self.spaces.flux[id].functions;
                let psi = &self.spaces.pressure[id].functions;
                let mut add_column = |sol: &LocalSolution, dof: Option<DofRef>| {
                    let out = sol.side_outflow(side);
                    let mut trace = sol.side_trace(side, half);
                    if let Some(d) = dof {
                        if d.interface == id && d.unknown == Unknown::Pressure {
                            for (t, p) in trace.iter_mut().zip(&psi[d.index]) {
                                *t -= p;
                            }
                        }
                    }
                    let col = dof.map(|d| layout.index(d.interface, d.unknown, d.index));
                    for (l, f) in phi.iter().enumerate() {
                        let v: f64 = (0..out.len())
                            .map(|q| {
                                let mismatch = if trace_form[q] {
                                    trace[q]
                                } else {
                                    beta[q] * out[q]
                                };
                                f[q] * e * sign * mismatch
                            })
                            .sum();
                        push(&mut a, &mut rhs, layout.index(id, Unknown::Flux, l), col, v);
                    }
                    for (l, f) in psi.iter().enumerate() {
                        let v: f64 = (0..out.len()).map(|q| f[q] * e * out[q]).sum();
                        push(
                            &mut a,
                            &mut rhs,
                            layout.index(id, Unknown::Pressure, l),
                            col,
                            v,
                        );
                    }
                };
                add_column(&r.particular, None);
                for (dof, sol) in &r.responses {
                    add_column(sol, Some(*dof));
                }
                // The −β U_H term of this side on flux-form edges.
                for (l, fl) in phi.iter().enumerate() {
                    for (j, fj) in phi.iter().enumerate() {
                        let v: f64 = (0..fl.len())
                            .filter(|&q| !trace_form[q])
                            .map(|q| beta[q] * fl[q] * fj[q] * e)
                            .sum();
                        if v != 0.0 {
                            a.add(
                                layout.index(id, Unknown::Flux, l),
                                layout.index(id, Unknown::Flux, j),
                                -v,
                            );
                        }
                    }
                }
            }
        }
        (a, rhs)
    }

    fn reconstruct(&self, responses: &[BasisResponses], x: &[f64]) -> Result<Vec<LocalSolution>> {
        responses
            .par_iter()
            .map(|r| {
                let coef: Vec<f64> = r
                    .responses
                    .iter()
                    .map(|(dof, _)| x[self.layout.index(dof.interface, dof.unknown, dof.index)])
                    .collect();
                r.combine(&coef)
            })
            .collect()
    }

    /// `A x − b` of the interface system, evaluated on the local solutions
    /// reconstructed from `x`.
    fn interface_residual(
        &self,
        responses: &[BasisResponses],
        local: &[LocalSolution],
        x: &[f64],
        pinned: bool,
    ) -> Vec<f64> {
        let layout = &self.layout;
        let mut res = vec![0.0; layout.n];
        let combine = |k: usize, unknown: Unknown, functions: &[Vec<f64>], len: usize| {
            let o = match unknown {
                Unknown::Flux => layout.flux_offset[k],
                Unknown::Pressure => layout.pressure_offset[k],
            };
            let mut v = vec![0.0; len];
            for (c, f) in x[o..o + functions.len()].iter().zip(functions) {
                v.iter_mut().zip(f).for_each(|(v, f)| *v += c * f);
            }
            v
        };
        for (r, sol) in responses.iter().zip(local) {
            let sub = &self.disc.decomposition.subdomains[r.subdomain];
            for (side, id, sign) in sub.interfaces() {
                let beta = r.betas[side.index()].as_ref().unwrap();
                let half = r.halves[side.index()].as_ref().unwrap();
                let e = self.disc.skeleton.interfaces[id].edge_length;
                let phi = &self.spaces.flux[id].functions;
                let psi = &self.spaces.pressure[id].functions;
                let out = sol.side_outflow(side);
                let trace = sol.side_trace(side, half);
                let u_h = combine(id, Unknown::Flux, phi, out.len());
                let p_h = combine(id, Unknown::Pressure, psi, out.len());
                let mismatch: Vec<f64> = (0..out.len())
                    .map(|q| {
                        if beta[q] > half[q] {
                            sign * (trace[q] - p_h[q])
                        } else {
                            beta[q] * (sign * out[q] - u_h[q])
                        }
                    })
                    .collect();
                for (l, f) in phi.iter().enumerate() {
                    res[layout.index(id, Unknown::Flux, l)] +=
                        (0..out.len()).map(|q| f[q] * e * mismatch[q]).sum::<f64>();
                }
                for (l, f) in psi.iter().enumerate() {
                    res[layout.index(id, Unknown::Pressure, l)] +=
                        (0..out.len()).map(|q| f[q] * e * out[q]).sum::<f64>();
                }
            }
        }
        if pinned {
            let row = self.gauge_row();
            res[row] = (0..self.spaces.n_interfaces())
                .flat_map(|k| {
                    let o = layout.pressure_offset[k];
                    x[o..o + self.spaces.pressure[k].dim()].iter().copied()
                })
                .sum();
        }
        res
    }

    fn gauge_row(&self) -> usize {
        let c = self.spaces.pressure[0].constant_coefficients();
        let l = c
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (l, v)| {
                if v.abs() > best.1 {
                    (l, v.abs())
                } else {
                    best
                }
            })
            .0;
        self.layout.index(0, Unknown::Pressure, l)
    }

    /// Replace one flux-jump row of interface 0 by `Σ P coefficients = 0`.
    /// That row is implied by the others through global conservation when
    /// no pressure is prescribed.
    fn apply_gauge(&self, a: &mut TripletBuilder, rhs: &mut [f64]) {
        let row = self.gauge_row();
        let cols: Vec<(usize, f64)> = (0..self.spaces.n_interfaces())
            .flat_map(|k| {
                let o = self.layout.pressure_offset[k];
                (o..o + self.spaces.pressure[k].dim()).map(|c| (c, 1.0))
            })
            .collect();
        a.replace_row(row, cols);
        rhs[row] = 0.0;
    }

    /// `Σ_e ψ |e| (u_lo·ň − u_hi·ň)` for every pressure test function, per interface.
    pub fn flux_jump_residuals(&self, sol: &FlowField) -> Vec<Vec<f64>> {
        let grid = &self.disc.grid;
        self.disc
            .skeleton
            .interfaces
            .iter()
            .zip(&self.spaces.pressure)
            .map(|(it, space)| {
                let jump: Vec<f64> = (0..it.len)
                    .map(|l| {
                        let f = it.edge_face(grid, l);
                        match it.orientation {
                            Orientation::Vertical => sol.flux.ux_lo[f] - sol.flux.ux_hi[f],
                            Orientation::Horizontal => sol.flux.uy_lo[f] - sol.flux.uy_hi[f],
                        }
                    })
                    .collect();
                space
                    .functions
                    .iter()
                    .map(|psi| {
                        psi.iter()
                            .zip(&jump)
                            .map(|(p, j)| p * j * it.edge_length)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn push(a: &mut TripletBuilder, rhs: &mut [f64], row: usize, col: Option<usize>, v: f64) {
    match col {
        Some(c) => {
            if v != 0.0 {
                a.add(row, c, v)
            }
        }
        None => rhs[row] -= v,
    }
}

/// Copy a block solution into the global field. Faces on the block boundary
/// receive only the value of the side the block lies on, unless they are
/// also on the domain boundary.
fn scatter(grid: &FineGrid, sol: &LocalSolution, out: &mut FlowField) {
    let b = sol.block;
    for j in 0..b.ny {
        for i in 0..b.nx {
            out.pressure[b.global(grid, i, j)] = sol.pressure[b.local(i, j)];
        }
    }
    for j in 0..b.ny {
        for i in 0..=b.nx {
            let (gi, gj) = (b.i0 + i, b.j0 + j);
            let f = grid.xface(gi, gj);
            let v = sol.ux[sol.xface(i, j)];
            if i > 0 && i < b.nx || gi == 0 || gi == grid.nx() {
                out.flux.ux_lo[f] = v;
                out.flux.ux_hi[f] = v;
            } else if i == 0 {
                out.flux.ux_hi[f] = v;
            } else {
                out.flux.ux_lo[f] = v;
            }
        }
    }
    for j in 0..=b.ny {
        for i in 0..b.nx {
            let (gi, gj) = (b.i0 + i, b.j0 + j);
            let f = grid.yface(gi, gj);
            let v = sol.uy[sol.yface(i, j)];
            if j > 0 && j < b.ny || gj == 0 || gj == grid.ny() {
                out.flux.uy_lo[f] = v;
                out.flux.uy_hi[f] = v;
            } else if j == 0 {
                out.flux.uy_hi[f] = v;
            } else {
                out.flux.uy_lo[f] = v;
            }
        }
    }
}

/// Monolithic two-point flux solve on the whole grid.
pub fn fine_reference_solve(
    grid: &FineGrid,
    field: &PermeabilityField,
    mobility: Option<&[f64]>,
    bspec: &BoundarySpec,
) -> Result<FlowField> {
    bspec.validate(grid)?;
    if !field.matches(grid) {
        return Err(Error::Contract(
            "permeability field does not match the grid".into(),
        ));
    }
    let kappa = effective_permeability(field, mobility)?;
    let block = CellBlock::whole(grid);
    let mut kinds: [Vec<FaceKind>; 4] = Default::default();
    let mut rhs = BlockRhs::zeros(&block);
    for side in Side::ALL {
        for bc in &bspec.sides[side.index()] {
            let (k, v) = match *bc {
                FaceBc::Pressure(g) => (FaceKind::Dirichlet, g),
                FaceBc::Flux(z) => (FaceKind::Neumann, z),
            };
            kinds[side.index()].push(k);
            let n = kinds[side.index()].len();
            rhs.side_values[side.index()][n - 1] = v;
        }
    }
    rhs.sources.clone_from(&bspec.sources);
    let op = BlockOperator::new(grid, block, &kappa, kinds)?;
    let sol = op.solve(&rhs)?;
    let mut out = FlowField {
        pressure: vec![0.0; grid.n_cells()],
        flux: SidedFlux::zeros(grid),
    };
    scatter(grid, &sol, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub pressure: f64,
    pub flux: f64,
}

/// Relative L² pressure and flux errors. `zero_mean` compares pressures in
/// a zero-mean gauge (for problems without prescribed pressure).
pub fn error_norms(
    grid: &FineGrid,
    approx: &FlowField,
    reference: &FlowField,
    zero_mean: bool,
) -> Result<ErrorNorms> {
    Ok(ErrorNorms {
        pressure: pressure_error(grid, &approx.pressure, &reference.pressure, zero_mean)?,
        flux: flux_error(grid, &approx.flux, &reference.flux)?,
    })
}

/// Net outflow through the domain boundary from own-side face values.
pub fn boundary_outflow(grid: &FineGrid, flux: &SidedFlux) -> f64 {
    let (ax, ay) = (grid.hy(), grid.hx());
    let mut out = 0.0;
    for j in 0..grid.ny() {
        out += ax * (flux.ux_lo[grid.xface(grid.nx(), j)] - flux.ux_hi[grid.xface(0, j)]);
    }
    for i in 0..grid.nx() {
        out += ay * (flux.uy_lo[grid.yface(i, grid.ny())] - flux.uy_hi[grid.yface(i, 0)]);
    }
    out
}

/// Single-call convenience wrapper around [`MrcmSolver`].
pub fn solve_mrcm(
    disc: &Discretization,
    field: &PermeabilityField,
    mobility: Option<&[f64]>,
    bspec: &BoundarySpec,
    preset: MethodPreset,
    scheme: SpaceScheme,
) -> Result<MultiscaleSolution> {
    MrcmSolver::new(disc, field, preset, scheme, &ClassifierConfig::default())?
        .solve(mobility, bspec)
}
