//! Sequential two-phase flow: elliptic velocity updates, velocity
//! extrapolation between them and explicit upwind saturation transport.

mod upwind;

pub use upwind::{
    cell_outgoing_rates, cfl_timestep, inflow_rate, pvi_increment, upwind_step, WaterBudget,
    BOUND_SLACK,
};

use crate::downscale::{stitch, PatchConfig};
use crate::error::{Error, Result};
use crate::field::{FluidModel, PermeabilityField};
use crate::flux::{relative_l1, FaceFlux};
use crate::grid::{Discretization, FineGrid};
use crate::mrcm::{effective_permeability, fine_reference_solve, MrcmSolver};
use crate::subdomain_solver::BoundarySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationState {
    pub s: Vec<f64>,
    pub time: f64,
    pub pvi: f64,
}

impl SaturationState {
    pub fn new(grid: &FineGrid, s0: Vec<f64>) -> Result<Self> {
        if s0.len() != grid.n_cells() {
            return Err(Error::Config(format!(
                "initial saturation has {} values, grid has {} cells",
                s0.len(),
                grid.n_cells()
            )));
        }
        if s0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("initial saturation outside [0, 1]".into()));
        }
        Ok(Self {
            s: s0,
            time: 0.0,
            pvi: 0.0,
        })
    }

    pub fn uniform(grid: &FineGrid, s0: f64) -> Result<Self> {
        Self::new(grid, vec![s0; grid.n_cells()])
    }

    /// Water volume in the domain (unit porosity).
    pub fn water_volume(&self, grid: &FineGrid) -> f64 {
        grid.cell_volume() * self.s.iter().sum::<f64>()
    }

    pub fn in_bounds(&self) -> bool {
        self.s
            .iter()
            .all(|v| *v >= -BOUND_SLACK && *v <= 1.0 + BOUND_SLACK)
    }
}

/// Operator-splitting controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingConfig {
    /// Maximum transport steps per elliptic step.
    pub c: usize,
    pub cfl: f64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        Self { c: 20, cfl: 0.9 }
    }
}

impl SplittingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(Error::Config("C must be a positive integer".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "Courant number {} outside (0, 1]",
                self.cfl
            )));
        }
        Ok(())
    }
}

/// Velocity at `t` from the last two elliptic solutions, linear in time.
/// Without a previous solution the current one is returned unchanged.
/// `t` must lie in `[t_n, t_next]`.
pub fn extrapolate_velocity(
    previous: Option<(f64, &FaceFlux)>,
    current: (f64, &FaceFlux),
    t: f64,
    t_next: f64,
) -> Result<FaceFlux> {
    let (tn, un) = current;
    if !(t >= tn && t <= t_next) {
        return Err(Error::Contract(format!(
            "extrapolation time {t} outside [{tn}, {t_next}]"
        )));
    }
    match previous {
        None => Ok(un.clone()),
        Some((tp, up)) => {
            let dt = tn - tp;
            if !(dt > 0.0) {
                return Err(Error::Contract(format!(
                    "elliptic times must increase, got {tp} then {tn}"
                )));
            }
            Ok(un.lincomb((t - tp) / dt, up, -(t - tn) / dt))
        }
    }
}

/// Source of conservative single-valued velocities for a given mobility.
pub trait VelocitySolver {
    fn velocity(&mut self, mobility: &[f64], bspec: &BoundarySpec) -> Result<FaceFlux>;

    fn label(&self) -> String;
}

/// Monolithic fine-grid velocity.
#[derive(Debug, Clone)]
pub struct FineVelocity<'a> {
    pub grid: &'a FineGrid,
    pub field: &'a PermeabilityField,
}

impl VelocitySolver for FineVelocity<'_> {
    fn velocity(&mut self, mobility: &[f64], bspec: &BoundarySpec) -> Result<FaceFlux> {
        Ok(
            fine_reference_solve(self.grid, self.field, Some(mobility), bspec)?
                .flux
                .averaged(),
        )
    }

    fn label(&self) -> String {
        "fine".into()
    }
}

/// Multiscale velocity followed by conservative downscaling.
#[derive(Debug, Clone)]
pub struct MultiscaleVelocity<'a> {
    pub solver: MrcmSolver<'a>,
    pub field: &'a PermeabilityField,
    pub patch: PatchConfig,
}

impl VelocitySolver for MultiscaleVelocity<'_> {
    fn velocity(&mut self, mobility: &[f64], bspec: &BoundarySpec) -> Result<FaceFlux> {
        let ms = self.solver.solve(Some(mobility), bspec)?;
        let disc: &Discretization = self.solver.discretization();
        if disc.skeleton.n_interfaces() == 0 {
            return Ok(ms.field.flux.averaged());
        }
        let kappa = effective_permeability(self.field, Some(mobility))?;
        stitch(disc, &kappa, &bspec.sources, &ms.field.flux, self.patch)
    }

    fn label(&self) -> String {
        format!(
            "{}-{}",
            self.solver.preset().label(),
            self.solver.scheme().label()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub pvi: f64,
    pub time: f64,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseRun {
    pub label: String,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SaturationState,
    pub budget: WaterBudget,
    pub initial_water: f64,
    pub elliptic_steps: usize,
    pub transport_steps: usize,
}

impl TwoPhaseRun {
    /// `|final − initial − (injected − produced)|` relative to the injected volume.
    pub fn mass_balance_error(&self, grid: &FineGrid) -> f64 {
        let change = self.final_state.water_volume(grid) - self.initial_water;
        let net = self.budget.injected - self.budget.produced;
        (change - net).abs() / self.budget.injected.abs().max(f64::MIN_POSITIVE)
    }
}

/// Run the splitting loop until every snapshot PVI (sorted, positive) is
/// reached. The last snapshot is the horizon.
pub fn run_two_phase(
    grid: &FineGrid,
    solver: &mut dyn VelocitySolver,
    fluid: &FluidModel,
    bspec: &BoundarySpec,
    split: SplittingConfig,
    initial: SaturationState,
    snapshots: &[f64],
) -> Result<TwoPhaseRun> {
    split.validate()?;
    bspec.validate(grid)?;
    if snapshots.is_empty()
        || snapshots.windows(2).any(|w| !(w[0] < w[1]))
        || !(snapshots[0] > initial.pvi)
    {
        return Err(Error::Config(
            "snapshot PVI values must be increasing and beyond the initial state".into(),
        ));
    }
    let sources = &bspec.sources;
    let label = solver.label();
    let initial_water = initial.water_volume(grid);
    let mut state = initial;
    let mut budget = WaterBudget::default();
    let mut out = Vec::with_capacity(snapshots.len());
    let mut previous: Option<(f64, FaceFlux)> = None;
    let (mut elliptic_steps, mut transport_steps) = (0, 0);
    let mut next_snap = 0;
    while next_snap < snapshots.len() {
        let mobility = fluid.mobility_field(&state.s)?;
        let un = solver.velocity(&mobility, bspec)?;
        elliptic_steps += 1;
        let tn = state.time;
        let mut dt = cfl_timestep(grid, &un, sources, fluid, split.cfl)
            .ok_or_else(|| Error::Contract("no flow: the injected volume cannot advance".into()))?;
        // The extrapolated velocity is linear in time per face, so checking
        // the last substep covers the whole window.
        if let Some((tp, up)) = &previous {
            let t_last = tn + (split.c - 1) as f64 * dt;
            let u_last = extrapolate_velocity(Some((*tp, up)), (tn, &un), t_last, t_last)?;
            if let Some(d) = cfl_timestep(grid, &u_last, sources, fluid, split.cfl) {
                dt = dt.min(d);
            }
        }
        let t_window = tn + (split.c - 1) as f64 * dt;
        for k in 0..split.c {
            let u = extrapolate_velocity(
                previous.as_ref().map(|(t, u)| (*t, u)),
                (tn, &un),
                tn + k as f64 * dt,
                t_window,
            )?;
            let rate = inflow_rate(grid, &u, sources) / grid.domain_volume();
            if !(rate > 0.0) {
                return Err(Error::Contract(
                    "no inflow: the injected volume cannot advance".into(),
                ));
            }
            let target = snapshots[next_snap];
            let mut step = dt;
            let hits = state.pvi + rate * step >= target;
            if hits {
                step = (target - state.pvi) / rate;
            }
            let (s, b) = upwind_step(grid, &state.s, &u, step, bspec, fluid)?;
            state.s = s;
            budget.add(b);
            state.time += step;
            state.pvi = if hits {
                target
            } else {
                state.pvi + rate * step
            };
            transport_steps += 1;
            if hits {
                out.push(Snapshot {
                    pvi: target,
                    time: state.time,
                    s: state.s.clone(),
                });
                next_snap += 1;
                break;
            }
        }
        previous = Some((tn, un));
    }
    Ok(TwoPhaseRun {
        label,
        snapshots: out,
        final_state: state,
        budget,
        initial_water,
        elliptic_steps,
        transport_steps,
    })
}

/// Relative L¹ saturation error at every common snapshot.
pub fn saturation_errors(approx: &TwoPhaseRun, reference: &TwoPhaseRun) -> Result<Vec<(f64, f64)>> {
    if approx.snapshots.len() != reference.snapshots.len() {
        return Err(Error::Contract("runs have different snapshot lists".into()));
    }
    approx
        .snapshots
        .iter()
        .zip(&reference.snapshots)
        .map(|(a, r)| {
            if (a.pvi - r.pvi).abs() > 1e-12 * r.pvi.max(1.0) {
                return Err(Error::Contract(format!(
                    "snapshot PVI mismatch: {} vs {}",
                    a.pvi, r.pvi
                )));
            }
            Ok((r.pvi, relative_l1(&a.s, &r.s)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_field, presets};
    use crate::mrcm::MethodPreset;
    use crate::spaces::{ClassifierConfig, SpaceScheme};

    #[test]
    fn extrapolation_formula() {
        let g = FineGrid::unit_square(4).unwrap();
        let a = FaceFlux::uniform(&g, 1.0, 2.0);
        let b = FaceFlux::uniform(&g, 3.0, -1.0);
        // At t_n the current field comes back exactly.
        let at_n = extrapolate_velocity(Some((0.0, &a)), (0.5, &b), 0.5, 1.0).unwrap();
        assert_eq!(at_n, b);
        // Half a step ahead: 1.5 u^n - 0.5 u^{n-1}.
        let mid = extrapolate_velocity(Some((0.0, &a)), (0.5, &b), 0.75, 1.0).unwrap();
        assert!((mid.ux[0] - (1.5 * 3.0 - 0.5 * 1.0)).abs() < 1e-15);
        assert!((mid.uy[0] - (1.5 * -1.0 - 0.5 * 2.0)).abs() < 1e-15);
        let same = extrapolate_velocity(Some((0.0, &b)), (0.5, &b), 0.9, 1.0).unwrap();
        assert!(same.lincomb(1.0, &b, -1.0).max_abs() < 1e-15);
        assert_eq!(extrapolate_velocity(None, (0.0, &a), 0.3, 1.0).unwrap(), a);
        assert!(extrapolate_velocity(None, (0.5, &a), 0.3, 1.0).is_err());
        assert!(extrapolate_velocity(None, (0.5, &a), 1.3, 1.0).is_err());
    }

    #[test]
    fn splitting_config_validation() {
        assert!(SplittingConfig::default().validate().is_ok());
        assert!(SplittingConfig { c: 0, cfl: 0.5 }.validate().is_err());
        assert!(SplittingConfig { c: 1, cfl: 1.5 }.validate().is_err());
    }

    /// Replays the splitting loop with C = 1 and checks that every step used
    /// the fresh elliptic velocity.
    #[test]
    fn single_substep_never_extrapolates() {
        struct Recording<'a> {
            inner: FineVelocity<'a>,
            last: Option<FaceFlux>,
        }
        impl VelocitySolver for Recording<'_> {
            fn velocity(&mut self, m: &[f64], b: &BoundarySpec) -> Result<FaceFlux> {
                let u = self.inner.velocity(m, b)?;
                self.last = Some(u.clone());
                Ok(u)
            }
            fn label(&self) -> String {
                "recording".into()
            }
        }
        let g = FineGrid::unit_square(10).unwrap();
        let f = generate_field(&presets::combined(1e2), &g).unwrap();
        let fluid = FluidModel::with_viscosity_ratio(10.0).unwrap();
        let b = BoundarySpec::slab_flux(&g, 1.0);
        let split = SplittingConfig { c: 1, cfl: 0.9 };
        let mut rec = Recording {
            inner: FineVelocity {
                grid: &g,
                field: &f,
            },
            last: None,
        };
        let s0 = SaturationState::uniform(&g, 0.0).unwrap();
        let run = run_two_phase(&g, &mut rec, &fluid, &b, split, s0.clone(), &[0.05]).unwrap();
        assert_eq!(run.elliptic_steps, run.transport_steps);
        // Replaying the steps by hand with the fresh velocity gives the same state.
        let mut s = s0.s.clone();
        let mut pvi = 0.0;
        let mut fine = FineVelocity {
            grid: &g,
            field: &f,
        };
        for _ in 0..run.transport_steps {
            let u = fine
                .velocity(&fluid.mobility_field(&s).unwrap(), &b)
                .unwrap();
            let rate = inflow_rate(&g, &u, &b.sources);
            let mut dt = cfl_timestep(&g, &u, &b.sources, &fluid, 0.9).unwrap();
            if pvi + rate * dt >= 0.05 {
                dt = (0.05 - pvi) / rate;
            }
            s = upwind_step(&g, &s, &u, dt, &b, &fluid).unwrap().0;
            pvi += rate * dt;
        }
        assert_eq!(s, run.final_state.s);
    }

    #[test]
    fn fine_self_comparison_and_mass_balance() {
        let g = FineGrid::unit_square(20).unwrap();
        let f = generate_field(&presets::combined(1e4), &g).unwrap();
        let fluid = FluidModel::with_viscosity_ratio(10.0).unwrap();
        let b = BoundarySpec::slab_flux(&g, 1.0);
        let s0 = SaturationState::uniform(&g, 0.0).unwrap();
        let snaps = [0.02, 0.05];
        let mut a = FineVelocity {
            grid: &g,
            field: &f,
        };
        let ra = run_two_phase(
            &g,
            &mut a,
            &fluid,
            &b,
            SplittingConfig::default(),
            s0.clone(),
            &snaps,
        )
        .unwrap();
        let mut c = FineVelocity {
            grid: &g,
            field: &f,
        };
        let rc = run_two_phase(
            &g,
            &mut c,
            &fluid,
            &b,
            SplittingConfig::default(),
            s0,
            &snaps,
        )
        .unwrap();
        for (pvi, e) in saturation_errors(&ra, &rc).unwrap() {
            assert_eq!(e, 0.0, "at {pvi}");
        }
        assert!(ra.final_state.in_bounds());
        assert!(ra.mass_balance_error(&g) < 1e-12);
        assert!((ra.final_state.pvi - 0.05).abs() < 1e-15);
        // Nothing produced before breakthrough, so the water volume equals the PVI.
        assert!((ra.final_state.water_volume(&g) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn multiscale_five_spot_run_conserves_water() {
        let d = Discretization::new(FineGrid::unit_square(20).unwrap(), 2, 2).unwrap();
        let g = &d.grid;
        let f = generate_field(&presets::combined(1e4), g).unwrap();
        let fluid = FluidModel::with_viscosity_ratio(10.0).unwrap();
        let b = BoundarySpec::quarter_five_spot(g, 0.1);
        let solver = MrcmSolver::new(
            &d,
            &f,
            MethodPreset::amrcm(),
            SpaceScheme::Pbs,
            &ClassifierConfig::default(),
        )
        .unwrap();
        let mut ms = MultiscaleVelocity {
            solver,
            field: &f,
            patch: PatchConfig::default(),
        };
        assert_eq!(ms.label(), "aMRCM-PBS");
        let s0 = SaturationState::uniform(g, 0.0).unwrap();
        let run = run_two_phase(
            g,
            &mut ms,
            &fluid,
            &b,
            SplittingConfig::default(),
            s0,
            &[0.03],
        )
        .unwrap();
        assert!(run.final_state.in_bounds());
        assert!(
            run.mass_balance_error(g) < 1e-8,
            "{}",
            run.mass_balance_error(g)
        );
        assert!(run.elliptic_steps > 1);
    }
}
