mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Simulator for collective Raman scattering of two (or more) three-level
/// atoms into a discretized Stokes continuum.
#[derive(Debug, Parser)]
#[command(name = "ramanpair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write trajectory, spectrum, and summary files.
    Simulate(RunArgs),
    /// Cross-check expm, RK4, and the closed-form solution on one grid.
    Compare(RunArgs),
    /// Sweep a delta_2 ladder and report adiabaticity of the elimination.
    ValidateAdiabatic(RunArgs),
    /// Run one scenario per value of a swept parameter.
    Sweep(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    config: PathBuf,
    /// Output directory (overrides RAMANPAIR_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Run even when the grid diagnostics fail.
    #[arg(long)]
    force: bool,
    /// Embed the full config text in the metadata sidecar.
    #[arg(long)]
    seed_meta: bool,
}

/// Errors carry the exit-code contract: 2 config, 3 grid validation,
/// 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    GridValidation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::GridValidation(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }

    fn describe(&self) -> (&'static str, &String) {
        match self {
            CliError::Config(m) => ("config error", m),
            CliError::GridValidation(m) => ("grid validation failed", m),
            CliError::Numerical(m) => ("numerical error", m),
            CliError::Io(m) => ("io error", m),
        }
    }
}

impl From<ramanpair::Error> for CliError {
    fn from(e: ramanpair::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Compare(a) => ("compare", a),
        Command::ValidateAdiabatic(a) => ("validate-adiabatic", a),
        Command::Sweep(a) => ("sweep", a),
    };
    let result = commands::run(name, args);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, message) = e.describe();
            eprintln!("ramanpair {name}: {kind}: {message}");
            ExitCode::from(e.exit_code())
        }
    }
}
