//! `hyperdof` command-line front end.
//!
//! Exit codes: 0 on success or PASS, 1 on an oracle mismatch, 2 on usage or
//! validation errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CavityArgs, FileConfig, InputArgs, MethodArgs, ModeArg, PhysicsArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hyperdof::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Parser, Debug)]
#[command(name = "hyperdof", version, about = "Hyper-CPF and hyper-parity gates on NV-cavity Blocks")]
struct Cli {
    /// JSON file with default values; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scattering coefficients of one NV-cavity unit.
    Coeffs {
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// All 64 basis inputs through the ideal hyper-CPF, checked against CPF⊗3.
    TruthTable {
        #[arg(long, value_parser = config::parse_outcome, allow_hyphen_values = true)]
        force_outcome: Option<hyperdof::hilbert::SpinConfig>,
    },
    /// One hyper-parity run: outcome, parities, branch probability and the
    /// corrected state.
    Parity {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, value_parser = config::parse_outcome, allow_hyphen_values = true)]
        force_outcome: Option<hyperdof::hilbert::SpinConfig>,
        /// Also sample this many outcomes and report their frequencies.
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long, value_enum)]
        physics: Option<PhysicsArg>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// Angle-averaged Block fidelity and efficiency.
    BlockMetrics {
        #[command(flatten)]
        cavity: CavityArgs,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Block metrics on a (κs/κ, cooperativity) grid, written as CSV.
    Sweep {
        /// e.g. `ks=0:0.5:26 coop=0.1:30:60` or `ks=0.1 coop=8.654`.
        #[arg(long, value_parser = config::parse_grid)]
        grid: Option<hyperdof::analysis::SweepGrid>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Full protocol run, printed as JSON.
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, value_parser = config::parse_outcome, allow_hyphen_values = true)]
        force_outcome: Option<hyperdof::hilbert::SpinConfig>,
        #[arg(long)]
        record_intermediates: bool,
        #[arg(long, value_enum)]
        physics: Option<PhysicsArg>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out = commands::Output { json: cli.json };
    match cli.command {
        Command::Coeffs { cavity } => commands::coeffs(&out, &file, &cavity),
        Command::TruthTable { force_outcome } => {
            let forced = commands::outcome_or_file(force_outcome, &file)?;
            commands::truth_table(&out, forced, seed)
        }
        Command::Parity { inputs, force_outcome, shots, physics, cavity } => {
            let forced = commands::outcome_or_file(force_outcome, &file)?;
            let (a, b) = inputs.specs(&file, seed)?;
            let physics = commands::resolve_physics(physics, &file, &cavity)?;
            commands::parity(&out, &a, &b, physics, forced, shots.or(file.shots), seed)
        }
        Command::BlockMetrics { cavity, method } => {
            let m = method.method(&file, seed)?;
            commands::block_metrics(&out, &file, &cavity, m)
        }
        Command::Sweep { grid, out: path, method } => {
            let grid = grid.or(file.grid.clone()).unwrap_or_else(hyperdof::analysis::SweepGrid::standard);
            let path = path.or(file.out.clone()).unwrap_or_else(|| PathBuf::from("sweep.csv"));
            let m = method.method(&file, seed)?;
            commands::sweep(&out, &grid, m, &path)
        }
        Command::Simulate { mode, inputs, force_outcome, record_intermediates, physics, cavity } => {
            let mode = mode.or(file.mode).unwrap_or(ModeArg::Cpf);
            let forced = commands::outcome_or_file(force_outcome, &file)?;
            let (a, b) = inputs.specs(&file, seed)?;
            let physics = commands::resolve_physics(physics, &file, &cavity)?;
            let record = record_intermediates || file.record_intermediates.unwrap_or(false);
            commands::simulate(&a, &b, mode.into(), physics, forced, seed, record)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
