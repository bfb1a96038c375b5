//! Scenario orchestration. Everything is computed in memory first; files
//! are only written once every run has succeeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use mrcm::downscale::{stitch, PatchConfig};
use mrcm::field::{
    encode_field, generate_field, load_field, FieldFormat, FluidModel, PermeabilityField,
};
use mrcm::flux::{flux_error, FaceFlux};
use mrcm::grid::Discretization;
use mrcm::mrcm::{error_norms, fine_reference_solve, FlowField, MethodPreset, MrcmSolver};
use mrcm::output::{cell_csv, cell_vtk};
use mrcm::spaces::SpaceScheme;
use mrcm::transport::{
    run_two_phase, saturation_errors, FineVelocity, MultiscaleVelocity, SaturationState,
    TwoPhaseRun,
};

use crate::config::{FieldSource, Scenario, SweepAxis};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    TwoPhase,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::TwoPhase => "twophase",
        }
    }
}

/// Per-run summary recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

/// Output files keyed by path relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    pub runs: Vec<RunSummary>,
}

impl Artifacts {
    fn add(&mut self, path: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), bytes.into());
    }
}

/// Error table: one row per sweep point, one column per method/scheme.
pub fn error_table(axis: &str, columns: &[String], rows: &[(f64, Vec<f64>)]) -> String {
    let mut s = String::from(axis);
    for c in columns {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (x, values) in rows {
        let _ = write!(s, "{x}");
        for v in values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// File-name-safe version of a run label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn execute(cmd: Command, sc: &Scenario) -> Result<Artifacts, CliError> {
    match cmd {
        Command::Solve => solve(sc),
        Command::Sweep => sweep(sc),
        Command::TwoPhase => two_phase(sc),
    }
}

struct Ctx<'a> {
    sc: &'a Scenario,
}

impl Ctx<'_> {
    fn fail(&self, what: &str) -> impl Fn(mrcm::Error) -> CliError + '_ {
        let scenario = if what.is_empty() {
            format!("scenario `{}`", self.sc.name)
        } else {
            format!("scenario `{}`, {what}", self.sc.name)
        };
        move |source| CliError::Run {
            scenario: scenario.clone(),
            source,
        }
    }

    fn field(&self, contrast: Option<f64>) -> Result<PermeabilityField, CliError> {
        let grid = &self.sc.grid;
        match &self.sc.field {
            FieldSource::File(path) => {
                load_field(path, grid).map_err(self.fail("loading the field"))
            }
            source => {
                let spec = source.spec(contrast).expect("preset names are validated");
                generate_field(&spec, grid).map_err(self.fail("generating the field"))
            }
        }
    }

    fn discretizations(&self) -> Result<Vec<Discretization>, CliError> {
        self.sc
            .decompositions
            .iter()
            .map(|&[mx, my]| {
                Discretization::new(self.sc.grid, mx, my)
                    .map_err(self.fail(&format!("decomposition {mx}x{my}")))
            })
            .collect()
    }

    fn label(&self, d: &Discretization, preset: MethodPreset, scheme: SpaceScheme) -> String {
        let base = format!("{}-{}", preset.label(), scheme.label());
        if self.sc.decompositions.len() > 1 {
            format!("{base}@{}x{}", d.decomposition.mx, d.decomposition.my)
        } else {
            base
        }
    }

    fn patch(&self) -> PatchConfig {
        PatchConfig {
            thickness: self.sc.raw.splitting.patch,
        }
    }

    fn stitched(
        &self,
        d: &Discretization,
        field: &PermeabilityField,
        ms: &FlowField,
    ) -> mrcm::Result<FaceFlux> {
        if d.skeleton.n_interfaces() == 0 {
            return Ok(ms.flux.averaged());
        }
        stitch(
            d,
            field.values(),
            &self.sc.bspec.sources,
            &ms.flux,
            self.patch(),
        )
    }

    fn dump(
        &self,
        art: &mut Artifacts,
        stem: &str,
        title: &str,
        fields: &[(&str, &[f64])],
    ) -> Result<(), CliError> {
        let grid = &self.sc.grid;
        let csv = cell_csv(grid, fields).map_err(self.fail(title))?;
        art.add(format!("{stem}.csv"), csv);
        if self.sc.raw.output.vtk {
            let vtk = cell_vtk(grid, title, fields).map_err(self.fail(title))?;
            art.add(format!("{stem}.vtk"), vtk);
        }
        Ok(())
    }
}

/// Pressure, two-sided flux and (optionally) stitched flux errors of one
/// multiscale run against the fine reference.
struct Errors {
    pressure: f64,
    flux: f64,
    stitched: Option<f64>,
}

fn contrast_of(field: &PermeabilityField) -> f64 {
    field.max() / field.min()
}

fn multiscale_errors(
    ctx: &Ctx<'_>,
    d: &Discretization,
    field: &PermeabilityField,
    reference: &FlowField,
    preset: MethodPreset,
    scheme: SpaceScheme,
    what: &str,
) -> Result<(Errors, FlowField), CliError> {
    let sc = ctx.sc;
    let fail = ctx.fail(what);
    let solver = MrcmSolver::new(d, field, preset, scheme, &sc.cutoffs).map_err(&fail)?;
    let ms = solver.solve(None, &sc.bspec).map_err(&fail)?;
    let e =
        error_norms(&sc.grid, &ms.field, reference, !sc.bspec.fixes_pressure()).map_err(&fail)?;
    let stitched = if sc.raw.output.stitch {
        let u = ctx.stitched(d, field, &ms.field).map_err(&fail)?;
        Some(flux_error(&sc.grid, &u.to_sided(), &reference.flux).map_err(&fail)?)
    } else {
        None
    };
    Ok((
        Errors {
            pressure: e.pressure,
            flux: e.flux,
            stitched,
        },
        ms.field,
    ))
}

fn add_error_tables(
    art: &mut Artifacts,
    axis: &str,
    columns: &[String],
    rows: &[(f64, Vec<Errors>)],
    stitch: bool,
) {
    let pick = |f: &dyn Fn(&Errors) -> f64| -> Vec<(f64, Vec<f64>)> {
        rows.iter()
            .map(|(x, es)| (*x, es.iter().map(f).collect()))
            .collect()
    };
    art.add(
        "pressure_errors.csv",
        error_table(axis, columns, &pick(&|e| e.pressure)),
    );
    art.add(
        "flux_errors.csv",
        error_table(axis, columns, &pick(&|e| e.flux)),
    );
    if stitch {
        art.add(
            "stitched_flux_errors.csv",
            error_table(axis, columns, &pick(&|e| e.stitched.unwrap_or(f64::NAN))),
        );
    }
}

fn flow_fields<'a>(
    grid: &mrcm::grid::FineGrid,
    f: &'a FlowField,
    mag: &'a mut Vec<f64>,
) -> [(&'static str, &'a [f64]); 2] {
    *mag = f.flux.averaged().cell_magnitude(grid);
    [
        ("pressure", &f.pressure),
        ("flux_magnitude", mag.as_slice()),
    ]
}

fn solve(sc: &Scenario) -> Result<Artifacts, CliError> {
    let ctx = Ctx { sc };
    let mut art = Artifacts::default();
    let field = ctx.field(None)?;
    let discs = ctx.discretizations()?;
    let reference = fine_reference_solve(&sc.grid, &field, None, &sc.bspec)
        .map_err(ctx.fail("fine reference"))?;
    art.add("permeability.csv", encode_field(&field, FieldFormat::Csv));
    if sc.raw.output.dumps {
        let mut mag = Vec::new();
        let fields = flow_fields(&sc.grid, &reference, &mut mag);
        ctx.dump(&mut art, "solutions/fine", "fine reference", &fields)?;
    }
    let mut columns = Vec::new();
    let mut errors = Vec::new();
    for d in &discs {
        for &preset in &sc.methods {
            for &scheme in &sc.schemes {
                let label = ctx.label(d, preset, scheme);
                let (e, ms) =
                    multiscale_errors(&ctx, d, &field, &reference, preset, scheme, &label)?;
                if sc.raw.output.dumps {
                    let mut mag = Vec::new();
                    let fields = flow_fields(&sc.grid, &ms, &mut mag);
                    ctx.dump(
                        &mut art,
                        &format!("solutions/{}", file_stem(&label)),
                        &label,
                        &fields,
                    )?;
                }
                let mut values = BTreeMap::from([
                    ("pressure_error".to_string(), e.pressure),
                    ("flux_error".to_string(), e.flux),
                ]);
                if let Some(s) = e.stitched {
                    values.insert("stitched_flux_error".into(), s);
                }
                art.runs.push(RunSummary {
                    label: label.clone(),
                    values,
                });
                columns.push(label);
                errors.push(e);
            }
        }
    }
    let rows = vec![(contrast_of(&field), errors)];
    add_error_tables(&mut art, "contrast", &columns, &rows, sc.raw.output.stitch);
    Ok(art)
}

fn sweep(sc: &Scenario) -> Result<Artifacts, CliError> {
    let ctx = Ctx { sc };
    let mut art = Artifacts::default();
    let discs = ctx.discretizations()?;
    let stitch = sc.raw.output.stitch;
    match sc.raw.sweep.axis {
        SweepAxis::Contrast => {
            if !matches!(sc.field, FieldSource::Preset { .. }) {
                return Err(CliError::Config(format!(
                    "{}: field `field.preset`: a contrast sweep needs a preset field",
                    sc.source_path.display()
                )));
            }
            if sc.raw.sweep.contrasts.is_empty() {
                return Err(CliError::Config(format!(
                    "{}: field `sweep.contrasts`: a contrast sweep needs at least one contrast",
                    sc.source_path.display()
                )));
            }
            let mut columns = Vec::new();
            for d in &discs {
                for &preset in &sc.methods {
                    for &scheme in &sc.schemes {
                        columns.push(ctx.label(d, preset, scheme));
                    }
                }
            }
            let mut rows = Vec::new();
            for &contrast in &sc.raw.sweep.contrasts {
                let field = ctx.field(Some(contrast))?;
                let reference = fine_reference_solve(&sc.grid, &field, None, &sc.bspec)
                    .map_err(ctx.fail(&format!("contrast {contrast:e}, fine reference")))?;
                let mut errs = Vec::new();
                for d in &discs {
                    for &preset in &sc.methods {
                        for &scheme in &sc.schemes {
                            let what =
                                format!("contrast {contrast:e}, {}", ctx.label(d, preset, scheme));
                            errs.push(
                                multiscale_errors(
                                    &ctx, d, &field, &reference, preset, scheme, &what,
                                )?
                                .0,
                            );
                        }
                    }
                }
                rows.push((contrast, errs));
            }
            add_error_tables(&mut art, "contrast", &columns, &rows, stitch);
        }
        SweepAxis::Alpha => {
            if sc.raw.sweep.alphas.is_empty() {
                return Err(CliError::Config(format!(
                    "{}: field `sweep.alphas`: an alpha sweep needs at least one alpha",
                    sc.source_path.display()
                )));
            }
            let field = ctx.field(None)?;
            art.add("permeability.csv", encode_field(&field, FieldFormat::Csv));
            let reference = fine_reference_solve(&sc.grid, &field, None, &sc.bspec)
                .map_err(ctx.fail("fine reference"))?;
            // Constant-alpha curves first, then the fixed methods, which
            // repeat the same value in every row.
            let mut columns = Vec::new();
            for d in &discs {
                for &scheme in &sc.schemes {
                    let base = format!("MRCM-{}", scheme.label());
                    columns.push(if discs.len() > 1 {
                        format!("{base}@{}x{}", d.decomposition.mx, d.decomposition.my)
                    } else {
                        base
                    });
                }
            }
            let mut fixed = Vec::new();
            for d in &discs {
                for &preset in &sc.methods {
                    for &scheme in &sc.schemes {
                        let label = ctx.label(d, preset, scheme);
                        let (e, _) =
                            multiscale_errors(&ctx, d, &field, &reference, preset, scheme, &label)?;
                        columns.push(label);
                        fixed.push(e);
                    }
                }
            }
            let mut rows = Vec::new();
            for &alpha in &sc.raw.sweep.alphas {
                let mut errs = Vec::new();
                for d in &discs {
                    for &scheme in &sc.schemes {
                        let preset = MethodPreset::Mrcm { alpha };
                        let what = ctx.label(d, preset, scheme);
                        errs.push(
                            multiscale_errors(&ctx, d, &field, &reference, preset, scheme, &what)?
                                .0,
                        );
                    }
                }
                errs.extend(fixed.iter().map(|e| Errors {
                    pressure: e.pressure,
                    flux: e.flux,
                    stitched: e.stitched,
                }));
                rows.push((alpha, errs));
            }
            add_error_tables(&mut art, "alpha", &columns, &rows, stitch);
        }
    }
    Ok(art)
}

fn two_phase(sc: &Scenario) -> Result<Artifacts, CliError> {
    let ctx = Ctx { sc };
    let mut art = Artifacts::default();
    let snapshots = &sc.raw.splitting.snapshots;
    if snapshots.is_empty() {
        return Err(CliError::Config(format!(
            "{}: field `splitting.snapshots`: a two-phase run needs at least one PVI checkpoint",
            sc.source_path.display()
        )));
    }
    let field = ctx.field(None)?;
    let discs = ctx.discretizations()?;
    art.add("permeability.csv", encode_field(&field, FieldFormat::Csv));
    let fluid = FluidModel::with_viscosity_ratio(sc.raw.fluid.viscosity_ratio)
        .map_err(ctx.fail("fluid model"))?;
    let grid = &sc.grid;
    let initial = || {
        SaturationState::uniform(grid, sc.raw.splitting.initial_saturation)
            .map_err(ctx.fail("initial saturation"))
    };
    let run_with = |solver: &mut dyn mrcm::transport::VelocitySolver, what: &str| {
        run_two_phase(
            grid,
            solver,
            &fluid,
            &sc.bspec,
            sc.splitting,
            initial()?,
            snapshots,
        )
        .map_err(ctx.fail(what))
    };

    let reference = run_with(
        &mut FineVelocity {
            grid,
            field: &field,
        },
        "fine two-phase reference",
    )?;
    let mut runs: Vec<(String, TwoPhaseRun)> = Vec::new();
    for d in &discs {
        for &preset in &sc.methods {
            for &scheme in &sc.schemes {
                let label = ctx.label(d, preset, scheme);
                let solver = MrcmSolver::new(d, &field, preset, scheme, &sc.cutoffs)
                    .map_err(ctx.fail(&label))?;
                let mut velocity = MultiscaleVelocity {
                    solver,
                    field: &field,
                    patch: ctx.patch(),
                };
                let run = run_with(&mut velocity, &label)?;
                runs.push((label, run));
            }
        }
    }

    let mut columns = Vec::new();
    let mut series = Vec::new();
    for (label, run) in &runs {
        let errs = saturation_errors(run, &reference).map_err(ctx.fail(label))?;
        columns.push(label.clone());
        series.push(errs);
    }
    let rows: Vec<(f64, Vec<f64>)> = snapshots
        .iter()
        .enumerate()
        .map(|(k, &pvi)| (pvi, series.iter().map(|s| s[k].1).collect()))
        .collect();
    art.add("saturation_errors.csv", error_table("pvi", &columns, &rows));

    for (label, run) in std::iter::once(("fine".to_string(), &reference))
        .chain(runs.iter().map(|(l, r)| (l.clone(), r)))
    {
        if sc.raw.output.dumps {
            for snap in &run.snapshots {
                let stem = format!("snapshots/{}/pvi_{}", file_stem(&label), snap.pvi);
                ctx.dump(
                    &mut art,
                    &stem,
                    &format!("{label} at {} PVI", snap.pvi),
                    &[("saturation", &snap.s)],
                )?;
            }
        }
        art.runs.push(RunSummary {
            label,
            values: BTreeMap::from([
                ("elliptic_steps".to_string(), run.elliptic_steps as f64),
                ("transport_steps".to_string(), run.transport_steps as f64),
                ("injected".to_string(), run.budget.injected),
                ("produced".to_string(), run.budget.produced),
                (
                    "mass_balance_error".to_string(),
                    run.mass_balance_error(grid),
                ),
                ("final_pvi".to_string(), run.final_state.pvi),
            ]),
        });
    }
    Ok(art)
}
