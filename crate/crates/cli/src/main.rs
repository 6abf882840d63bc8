//! Command-line driver for Rabi-dimer experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = concat!("rabidimer ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "rabidimer", version, about = "Photon dynamics in coupled quantum Rabi systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unitary evolution: photon and qubit traces plus a summary.
    Evolve(Common),
    /// Phase-diagram sweep over (g, J).
    Sweep(Common),
    /// Level-spacing and photon-number variance scan of a single Rabi system.
    Spectrum(Common),
    /// Quantum-jump ensemble with cavity damping.
    Trajectories(Common),
    /// Parameters of the equivalent model without the A² term.
    Renorm(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed for stochastic runs (overrides `damping.master_seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, action): (&'static str, Common, fn(&Context) -> Result<(), CliError>) = match cli.command {
        Command::Evolve(c) => ("evolve", c, commands::cmd_evolve),
        Command::Sweep(c) => ("sweep", c, commands::cmd_sweep),
        Command::Spectrum(c) => ("spectrum", c, commands::cmd_spectrum),
        Command::Trajectories(c) => ("trajectories", c, commands::cmd_trajectories),
        Command::Renorm(c) => ("renorm", c, commands::cmd_renorm),
    };
    let config = RunConfig::load(&common.config)?;
    let workers = match common.workers {
        Some(0) => return Err(CliError::Config("--workers must be positive".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let ctx = Context {
        config,
        overrides: Overrides {
            out: common.out,
            seed: common.seed,
        },
        workers,
        command: name,
    };
    action(&ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
