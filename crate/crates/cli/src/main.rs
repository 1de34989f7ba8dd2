//! `kshrink`: shrinkage estimation, condition checks and risk simulation.
//!
//! Exit codes: 0 success, 1 statistical or numerical failure, 2 input
//! error, 3 precondition error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kshrink_core::estimators::EstimatorKind;

use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kshrink", version, about = "Shrinkage estimators for k Gaussian mean vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Input CSV; repeat once per group for regression data.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,

    /// Write CSV output here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Monte Carlo replicates (draws for the identity checks).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,

    /// Variance scale of simulated data; overrides the config value.
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,

    /// Estimator to apply; repeatable. Overrides the config list.
    #[arg(long, global = true)]
    pub estimator: Vec<EstimatorKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the experiment of the config file and report its risk table.
    Simulate,
    /// Apply estimators to a data set.
    Estimate,
    /// Reproduce the reference PRIAL table.
    Table1,
    /// Check the minimaxity conditions of the hierarchical Bayes priors.
    CheckConditions,
    /// Monte Carlo checks of the risk identities and the unbiased risk estimate.
    Validate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate => commands::simulate(cli, &file),
        Command::Estimate => commands::estimate(cli, &file),
        Command::Table1 => commands::table1(cli),
        Command::CheckConditions => commands::check_conditions(&file),
        Command::Validate => commands::validate(cli, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
