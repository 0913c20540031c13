//! Command line front end for the spline-network pipeline.
//!
//! Each subcommand is one stage: simulate a converter dataset, train,
//! prune, snap edges onto symbolic bases, refine the constants, evaluate
//! against a dense baseline, rank variables without labels, screen
//! sensitivities, or tabulate correlations. Stages communicate through
//! files in the output directory, so a pipeline is a sequence of
//! invocations sharing `--out-dir`.

mod config;
mod pipeline;

use clap::{Parser, Subcommand};
use symkan::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "symkan", version, about = "Spline networks that end as formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dual-active-bridge converter's output voltage curve
    SimulateDab(pipeline::SimulateDabArgs),
    /// Fit a spline network to a CSV dataset
    Train(pipeline::TrainArgs),
    /// Remove low-importance hidden nodes from a trained model
    Prune(pipeline::PruneArgs),
    /// Snap spline edges onto closed-form bases
    Symbolify(pipeline::SymbolifyArgs),
    /// Polish the constants of a fully symbolic model
    Refine(pipeline::RefineArgs),
    /// Measure model error, optionally under noise and against a dense net
    Eval(pipeline::EvalArgs),
    /// Rank variables by learned dependency strength, no labels needed
    UnsupSelect(pipeline::UnsupArgs),
    /// Elementary-effects sensitivity screening of a trained model
    Sensitivity(pipeline::SensitivityArgs),
    /// Pearson, Spearman, and Kendall correlation of each feature vs the target
    Correlate(pipeline::CorrelateArgs),
}

/// Die quietly when the read end of a pipe goes away (`symkan ... | head`)
/// instead of panicking on the failed write.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SimulateDab(args) => pipeline::stage_simulate_dab(args),
        Command::Train(args) => pipeline::stage_train(args),
        Command::Prune(args) => pipeline::stage_prune(args),
        Command::Symbolify(args) => pipeline::stage_symbolify(args),
        Command::Refine(args) => pipeline::stage_refine(args),
        Command::Eval(args) => pipeline::stage_eval(args),
        Command::UnsupSelect(args) => pipeline::stage_unsup(args),
        Command::Sensitivity(args) => pipeline::stage_sensitivity(args),
        Command::Correlate(args) => pipeline::stage_correlate(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        };
        std::process::exit(code);
    }
}
