use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mrcm_cli::{invoke, Command, Invocation, Overrides};

#[derive(Parser)]
#[command(
    name = "mrcm",
    version,
    about = "Multiscale Robin coupled flow and transport studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single-phase solve of every method/scheme against the fine reference.
    Solve(Common),
    /// Error tables over a contrast or alpha sweep.
    Sweep(Common),
    /// Two-phase runs with saturation snapshots and error series.
    Twophase(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; beats MRCM_OUT_DIR and `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Replace `methods.list` with a single method, e.g. `amrcm` or `mrcm:1e-2`.
    #[arg(long)]
    method: Option<String>,
    /// Replace `methods.schemes` with a single scheme (`pol`, `pbs` or `full`).
    #[arg(long)]
    scheme: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Twophase(a) => (Command::TwoPhase, a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        overrides: Overrides {
            method: args.method,
            scheme: args.scheme,
        },
    };
    match invoke(&inv) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
