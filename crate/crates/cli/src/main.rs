//! `tvgarch` — simulate, fit, diagnose and compare time-varying AR/GARCH
//! models for positive responses under a Gamma likelihood.
//!
//! Exit codes: 0 success, 2 validation error, 3 convergence failure,
//! 4 I/O error. `TVGARCH_THREADS` caps chain-level parallelism.

mod commands;
mod config;
mod error;
mod ingest;
mod output;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "tvgarch",
    version,
    about = "Bayesian time-varying AR(1)/GARCH(1,1) models with a Gamma likelihood"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Simulate(commands::simulate::SimulateArgs),
    /// Run the two-step fit and write draws, bands and diagnostics.
    Fit(commands::fit::FitArgs),
    /// Compare completed fits on identical data via PSIS-LOO.
    Compare(commands::compare::CompareArgs),
    /// Recompute convergence diagnostics from saved draws.
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Reshape fitted bands (plus optional truth) into a plot-ready table.
    Plotdata(commands::plotdata::PlotdataArgs),
}

/// Applies the `TVGARCH_THREADS` cap before any parallel work starts.
fn init_threads() -> Result<(), CliError> {
    match std::env::var("TVGARCH_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                CliError::Validation(format!(
                    "TVGARCH_THREADS must be a positive integer (got `{raw}`)"
                ))
            })?;
            if n == 0 {
                return Err(CliError::Validation(
                    "TVGARCH_THREADS must be a positive integer (got `0`)".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
        Command::Plotdata(args) => commands::plotdata::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
