//! `dptune`: accounting, calibration, variant comparison and simulation
//! from the command line.

mod account;
mod calibrate;
mod compare;
mod exit;
mod output;
mod simulate;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dptune", version, about = "Privacy accounting for hyperparameter tuning on data subsets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the RDP curve of a (subsampled) Gaussian mechanism and its (ε, δ).
    Account(account::AccountArgs),
    /// Solve for σ, for the number of steps, or for a whole grid.
    Calibrate(calibrate::CalibrateArgs),
    /// ε of the baseline and both subset variants over a range of q.
    CompareVariants(compare::CompareArgs),
    /// Run replicated tuning experiments on a synthetic task.
    Simulate(simulate::SimulateArgs),
}

fn configure_threads() -> Result<(), exit::Failure> {
    let Ok(raw) = std::env::var("DP_TUNE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| exit::Failure::usage(format!("DP_TUNE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| exit::Failure::other(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Account(args) => account::run(&args),
        Command::Calibrate(args) => calibrate::run(&args),
        Command::CompareVariants(args) => compare::run(&args),
        Command::Simulate(args) => simulate::run(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dptune: {}", f.message());
            ExitCode::from(f.code)
        }
    }
}
