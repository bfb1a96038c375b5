//! Scenario configuration files (TOML).
//!
//! Every section rejects unknown keys. Semantic checks report the offending
//! key as a dotted path, e.g. `grid.nx`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mrcm::field::{presets, Feature, FieldSpec};
use mrcm::grid::{Discretization, FineGrid};
use mrcm::mrcm::MethodPreset;
use mrcm::spaces::{ClassifierConfig, SpaceScheme};
use mrcm::subdomain_solver::{BoundarySpec, FaceBc};
use mrcm::transport::SplittingConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Used in diagnostics and the manifest; defaults to the file stem.
    pub name: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    pub field: FieldConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub methods: MethodsConfig,
    #[serde(default)]
    pub cutoffs: CutoffConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub fluid: FluidConfig,
    #[serde(default)]
    pub splitting: SplitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Subdomain counts `[mx, my]`.
    pub sizes: Vec<[usize; 2]>,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            sizes: vec![[8, 8]],
        }
    }
}

/// Exactly one of `preset`, `file` or an inline spec (`background`, ...).
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub preset: Option<String>,
    pub contrast: Option<f64>,
    pub file: Option<PathBuf>,
    pub background: Option<f64>,
    pub k_max: Option<f64>,
    pub k_min: Option<f64>,
    #[serde(default)]
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    SlabFlux,
    SlabPressure,
    QuarterFiveSpot,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideBc {
    Pressure(f64),
    Flux(f64),
}

impl From<SideBc> for FaceBc {
    fn from(b: SideBc) -> Self {
        match b {
            SideBc::Pressure(g) => FaceBc::Pressure(g),
            SideBc::Flux(z) => FaceBc::Flux(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub i: usize,
    pub j: usize,
    /// Positive for injection.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub kind: BoundaryKind,
    /// Inflow velocity for `slab-flux`.
    #[serde(default = "one")]
    pub rate: f64,
    /// West and east pressures for `slab-pressure`.
    #[serde(default = "one")]
    pub left: f64,
    #[serde(default)]
    pub right: f64,
    /// Injector and producer rate for `quarter-five-spot`.
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default = "one")]
    pub inflow_saturation: f64,
    pub west: Option<SideBc>,
    pub east: Option<SideBc>,
    pub south: Option<SideBc>,
    pub north: Option<SideBc>,
    #[serde(default)]
    pub wells: Vec<Well>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            kind: BoundaryKind::default(),
            rate: 1.0,
            left: 1.0,
            right: 0.0,
            q: 1.0,
            inflow_saturation: 1.0,
            west: None,
            east: None,
            south: None,
            north: None,
            wells: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    /// Method names as accepted by [`MethodPreset`]'s parser.
    pub list: Vec<String>,
    pub schemes: Vec<String>,
}

impl Default for MethodsConfig {
    fn default() -> Self {
        Self {
            list: vec!["amrcm".into()],
            schemes: vec!["pol".into(), "pbs".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    #[serde(default = "one")]
    pub zeta_max: f64,
    #[serde(default = "one")]
    pub zeta_min: f64,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self {
            zeta_max: 1.0,
            zeta_min: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[default]
    Contrast,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub axis: SweepAxis,
    #[serde(default)]
    pub contrasts: Vec<f64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    /// `M = μ_o / μ_w`.
    #[serde(default = "ten")]
    pub viscosity_ratio: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            viscosity_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Maximum transport steps per elliptic step.
    #[serde(default = "twenty")]
    pub c: usize,
    #[serde(default = "cfl")]
    pub cfl: f64,
    /// PVI checkpoints; the last one ends the run.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Cells on each side of an interface in the downscaling strips.
    #[serde(default = "two")]
    pub patch: usize,
    #[serde(default)]
    pub initial_saturation: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            c: 20,
            cfl: 0.9,
            snapshots: Vec::new(),
            patch: 2,
            initial_saturation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write per-run solution or snapshot dumps.
    #[serde(default = "yes")]
    pub dumps: bool,
    /// Also write legacy VTK next to the CSV dumps.
    #[serde(default)]
    pub vtk: bool,
    /// Also report flux errors after conservative downscaling.
    #[serde(default)]
    pub stitch: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            dumps: true,
            vtk: false,
            stitch: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn cfl() -> f64 {
    0.9
}
fn twenty() -> usize {
    20
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}

/// How the permeability field is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    /// Named preset; the contrast can be swept.
    Preset {
        name: String,
        contrast: f64,
    },
    Spec(FieldSpec),
    File(PathBuf),
}

impl FieldSource {
    pub fn spec(&self, contrast: Option<f64>) -> Option<FieldSpec> {
        match self {
            FieldSource::Preset { name, contrast: c } => {
                presets::by_name(name, contrast.unwrap_or(*c))
            }
            FieldSource::Spec(s) => Some(s.clone()),
            FieldSource::File(_) => None,
        }
    }
}

/// A config after parsing, overrides and validation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source_path: PathBuf,
    pub raw: ScenarioConfig,
    pub grid: FineGrid,
    pub decompositions: Vec<[usize; 2]>,
    pub field: FieldSource,
    pub bspec: BoundarySpec,
    pub methods: Vec<MethodPreset>,
    pub schemes: Vec<SpaceScheme>,
    pub cutoffs: ClassifierConfig,
    pub splitting: SplittingConfig,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<String>,
    pub scheme: Option<String>,
}

fn bad(path: &Path, key: &str, msg: impl std::fmt::Display) -> CliError {
    let msg = msg.to_string();
    let msg = msg.strip_prefix("configuration error: ").unwrap_or(&msg);
    CliError::Config(format!("{}: field `{key}`: {msg}", path.display()))
}

pub fn parse(text: &str, path: &Path) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Read, parse and validate a config. Relative field file paths are taken
/// relative to the config file.
pub fn load(path: &Path, overrides: &Overrides) -> Result<(Scenario, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
    let mut raw = parse(text, path)?;
    if let Some(m) = &overrides.method {
        raw.methods.list = vec![m.clone()];
    }
    if let Some(s) = &overrides.scheme {
        raw.methods.schemes = vec![s.clone()];
    }
    let scenario = validate(raw, path)?;
    Ok((scenario, bytes))
}

pub fn validate(raw: ScenarioConfig, path: &Path) -> Result<Scenario, CliError> {
    let g = &raw.grid;
    if g.nx == 0 || g.ny == 0 {
        return Err(bad(path, "grid.nx", "grid dimensions must be positive"));
    }
    let grid = FineGrid::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| bad(path, "grid", e))?;

    if raw.decomposition.sizes.is_empty() {
        return Err(bad(path, "decomposition.sizes", "needs at least one entry"));
    }
    for (k, &[mx, my]) in raw.decomposition.sizes.iter().enumerate() {
        Discretization::new(grid, mx, my)
            .map_err(|e| bad(path, &format!("decomposition.sizes[{k}]"), e))?;
    }

    let field = field_source(&raw.field, path)?;
    if let Some(spec) = field.spec(None) {
        mrcm::field::generate_field(&spec, &grid).map_err(|e| bad(path, "field", e))?;
    }

    let bspec = boundary(&raw.boundary, &grid).map_err(|e| bad(path, "boundary", e))?;

    if raw.methods.list.is_empty() && raw.sweep.axis != SweepAxis::Alpha {
        return Err(bad(path, "methods.list", "needs at least one method"));
    }
    let methods = raw
        .methods
        .list
        .iter()
        .map(|m| {
            m.parse::<MethodPreset>()
                .map_err(|e| bad(path, "methods.list", e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if raw.methods.schemes.is_empty() {
        return Err(bad(path, "methods.schemes", "needs at least one scheme"));
    }
    let schemes = raw
        .methods
        .schemes
        .iter()
        .map(|s| {
            s.parse::<SpaceScheme>()
                .map_err(|e| bad(path, "methods.schemes", e))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cutoffs = ClassifierConfig {
        zeta_max: raw.cutoffs.zeta_max,
        zeta_min: raw.cutoffs.zeta_min,
        ..ClassifierConfig::default()
    };
    cutoffs.validate().map_err(|e| bad(path, "cutoffs", e))?;

    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    if !raw.sweep.contrasts.iter().all(|c| positive(c) && *c >= 1.0) {
        return Err(bad(
            path,
            "sweep.contrasts",
            "contrasts must be finite and >= 1",
        ));
    }
    if !raw.sweep.alphas.iter().all(positive) {
        return Err(bad(
            path,
            "sweep.alphas",
            "alpha values must be positive and finite",
        ));
    }

    if !positive(&raw.fluid.viscosity_ratio) {
        return Err(bad(path, "fluid.viscosity_ratio", "must be positive"));
    }
    let splitting = SplittingConfig {
        c: raw.splitting.c,
        cfl: raw.splitting.cfl,
    };
    splitting
        .validate()
        .map_err(|e| bad(path, "splitting", e))?;
    let snaps = &raw.splitting.snapshots;
    if !snaps.iter().all(positive) || snaps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(
            path,
            "splitting.snapshots",
            "PVI checkpoints must be positive and strictly increasing",
        ));
    }
    if raw.splitting.patch == 0 {
        return Err(bad(path, "splitting.patch", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&raw.splitting.initial_saturation) {
        return Err(bad(
            path,
            "splitting.initial_saturation",
            "must lie in [0, 1]",
        ));
    }

    let name = raw.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(Scenario {
        name,
        source_path: path.to_path_buf(),
        decompositions: raw.decomposition.sizes.clone(),
        grid,
        field,
        bspec,
        methods,
        schemes,
        cutoffs,
        splitting,
        raw,
    })
}

fn field_source(f: &FieldConfig, path: &Path) -> Result<FieldSource, CliError> {
    let inline = f.background.is_some() || f.k_max.is_some() || f.k_min.is_some();
    let given = [f.preset.is_some(), f.file.is_some(), inline]
        .iter()
        .filter(|b| **b)
        .count();
    if given != 1 {
        return Err(bad(
            path,
            "field",
            "give exactly one of `preset`, `file` or an inline spec (`background`, `k_max`, `k_min`, `features`)",
        ));
    }
    if let Some(name) = &f.preset {
        let contrast = f.contrast.unwrap_or(1e8);
        if !(contrast.is_finite() && contrast >= 1.0) {
            return Err(bad(path, "field.contrast", "must be finite and >= 1"));
        }
        if presets::by_name(name, contrast).is_none() {
            return Err(bad(
                path,
                "field.preset",
                format!(
                    "unknown preset {name:?}; known: {}",
                    presets::NAMES.join(", ")
                ),
            ));
        }
        return Ok(FieldSource::Preset {
            name: name.clone(),
            contrast,
        });
    }
    if f.contrast.is_some() || !f.features.is_empty() && !inline {
        return Err(bad(
            path,
            "field",
            "`contrast` and `features` need a preset or inline spec",
        ));
    }
    if let Some(file) = &f.file {
        let resolved = match path.parent() {
            Some(dir) if file.is_relative() => dir.join(file),
            _ => file.clone(),
        };
        if !resolved.is_file() {
            return Err(bad(
                path,
                "field.file",
                format!("field file {} does not exist", resolved.display()),
            ));
        }
        return Ok(FieldSource::File(resolved));
    }
    let background = f.background.unwrap_or(1.0);
    Ok(FieldSource::Spec(FieldSpec {
        background,
        k_max: f.k_max.unwrap_or(background),
        k_min: f.k_min.unwrap_or(background),
        features: f.features.clone(),
    }))
}

fn boundary(b: &BoundaryConfig, grid: &FineGrid) -> mrcm::Result<BoundarySpec> {
    let sided = [b.west, b.east, b.south, b.north];
    if b.kind != BoundaryKind::Custom && (sided.iter().any(Option::is_some) || !b.wells.is_empty())
    {
        return Err(mrcm::Error::Config(
            "west/east/south/north and wells are only allowed with kind = \"custom\"".into(),
        ));
    }
    let mut spec = match b.kind {
        BoundaryKind::SlabFlux => BoundarySpec::slab_flux(grid, b.rate),
        BoundaryKind::SlabPressure => BoundarySpec::slab_pressure(grid, b.left, b.right),
        BoundaryKind::QuarterFiveSpot => BoundarySpec::quarter_five_spot(grid, b.q),
        BoundaryKind::Custom => {
            let sides = sided.map(|s| s.map(FaceBc::from).unwrap_or(FaceBc::Flux(0.0)));
            let mut spec = BoundarySpec::from_sides(grid, sides);
            for w in &b.wells {
                if w.i >= grid.nx() || w.j >= grid.ny() {
                    return Err(mrcm::Error::Config(format!(
                        "well at ({}, {}) lies outside the grid",
                        w.i, w.j
                    )));
                }
                spec.sources[grid.cell(w.i, w.j)] += w.rate;
            }
            spec
        }
    };
    spec.inflow_saturation = b.inflow_saturation;
    spec.validate(grid)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Result<Scenario, CliError> {
        let path = Path::new("test.toml");
        validate(parse(text, path)?, path)
    }

    const MINIMAL: &str = "[grid]\nnx = 16\nny = 16\n[field]\npreset = \"combined\"\n";

    #[test]
    fn defaults() {
        let s = load_str(MINIMAL).unwrap();
        assert_eq!(s.name, "test");
        assert_eq!(s.decompositions, vec![[8, 8]]);
        assert_eq!(s.methods, vec![MethodPreset::amrcm()]);
        assert_eq!(s.schemes, vec![SpaceScheme::Pol, SpaceScheme::Pbs]);
        assert_eq!(
            s.field,
            FieldSource::Preset {
                name: "combined".into(),
                contrast: 1e8
            }
        );
        assert_eq!(s.bspec, BoundarySpec::slab_flux(&s.grid, 1.0));
        assert_eq!(s.splitting, SplittingConfig::default());
    }

    #[test]
    fn unknown_key_reports_line_and_name() {
        let err = load_str("[grid]\nnx = 16\nny = 16\nnz = 3\n[field]\npreset = \"combined\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(err.contains("nz"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let cases = [
            (MINIMAL.replace("combined", "marble"), "field.preset"),
            (
                format!("{MINIMAL}[methods]\nlist = [\"mortar\"]\nschemes = [\"pbs\"]\n"),
                "methods.list",
            ),
            (
                format!("{MINIMAL}[methods]\nlist = [\"mhm\"]\nschemes = [\"cubic\"]\n"),
                "methods.schemes",
            ),
            (
                format!("{MINIMAL}[decomposition]\nsizes = [[3, 3]]\n"),
                "decomposition.sizes[0]",
            ),
            (
                format!("{MINIMAL}[splitting]\nsnapshots = [0.2, 0.1]\n"),
                "splitting.snapshots",
            ),
            (format!("{MINIMAL}[splitting]\ncfl = 1.5\n"), "splitting"),
            (
                format!("{MINIMAL}[boundary]\nwest = {{ pressure = 1.0 }}\n"),
                "boundary",
            ),
            (format!("{MINIMAL}file = \"k.csv\"\n"), "field"),
        ];
        for (text, key) in cases {
            let err = load_str(&text).unwrap_err().to_string();
            assert!(err.contains(&format!("`{key}`")), "{key}: {err}");
        }
    }

    #[test]
    fn custom_boundary_and_inline_field() {
        let text = r#"
[grid]
nx = 10
ny = 10
[decomposition]
sizes = [[2, 2]]
[field]
background = 1.0
k_max = 1e4
k_min = 1.0
features = [{ kind = "fracture", from = [0.0, 0.5], to = [1.0, 0.5] }]
[boundary]
kind = "custom"
west = { pressure = 2.0 }
east = { pressure = 0.0 }
wells = [{ i = 3, j = 4, rate = 0.5 }]
"#;
        let s = load_str(text).unwrap();
        assert_eq!(s.bspec.sides[0][0], FaceBc::Pressure(2.0));
        assert_eq!(s.bspec.sides[2][0], FaceBc::Flux(0.0));
        assert_eq!(s.bspec.sources[s.grid.cell(3, 4)], 0.5);
        assert!(matches!(s.field, FieldSource::Spec(ref f) if f.features.len() == 1));
    }

    #[test]
    fn missing_field_file_is_a_config_error() {
        let text = "[grid]\nnx = 16\nny = 16\n[field]\nfile = \"/nonexistent/k.csv\"\n";
        let err = load_str(text).unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("field.file")));
    }
}
