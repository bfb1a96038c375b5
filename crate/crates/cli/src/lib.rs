//! Driver for single-phase error studies, contrast and alpha sweeps and
//! two-phase runs described by TOML scenario files.

pub mod config;
pub mod error;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{Overrides, Scenario, ScenarioConfig};
pub use error::CliError;
pub use run::{Artifacts, Command};

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "MRCM_OUT_DIR";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `--out`, then `MRCM_OUT_DIR`, then `output.dir`, then `out/<scenario>`.
pub fn output_dir(cli: Option<&Path>, env: Option<&Path>, sc: &Scenario) -> PathBuf {
    if let Some(p) = cli.or(env) {
        return p.to_path_buf();
    }
    match &sc.raw.output.dir {
        Some(d) if d.is_relative() => sc
            .source_path
            .parent()
            .map(|p| p.join(d))
            .unwrap_or_else(|| d.clone()),
        Some(d) => d.clone(),
        None => PathBuf::from("out").join(&sc.name),
    }
}

#[derive(Debug, Serialize)]
struct OutputEntry<'a> {
    path: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    mrcm: &'static str,
    mrcm_cli: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    scenario: &'a str,
    config: String,
    config_sha256: String,
    method_override: Option<&'a str>,
    scheme_override: Option<&'a str>,
    threads: usize,
    versions: Versions,
    wall_time_seconds: f64,
    outputs: Vec<OutputEntry<'a>>,
    runs: &'a [run::RunSummary],
}

/// Everything needed to run one scenario.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

/// Run a scenario and write its artifacts plus `manifest.json`. Returns
/// the output directory.
pub fn invoke(inv: &Invocation) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let (scenario, config_bytes) = config::load(&inv.config, &inv.overrides)?;
    let env = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let dir = output_dir(inv.out.as_deref(), env.as_deref(), &scenario);
    let artifacts = run::execute(inv.command, &scenario)?;

    let write = |path: &Path, bytes: &[u8]| -> Result<(), CliError> {
        let fail = |source| CliError::Output {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(fail)?;
        }
        std::fs::write(path, bytes).map_err(fail)
    };
    let mut outputs = Vec::new();
    for (rel, bytes) in &artifacts.files {
        write(&dir.join(rel), bytes)?;
        outputs.push(OutputEntry {
            path: rel,
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        command: inv.command.name(),
        scenario: &scenario.name,
        config: inv.config.display().to_string(),
        config_sha256: sha256_hex(&config_bytes),
        method_override: inv.overrides.method.as_deref(),
        scheme_override: inv.overrides.scheme.as_deref(),
        threads: rayon::current_num_threads(),
        versions: Versions {
            mrcm: mrcm::VERSION,
            mrcm_cli: env!("CARGO_PKG_VERSION"),
        },
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs,
        runs: &artifacts.runs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(dir)
}
