//! Command-line driver for the price-diffusion toolkit: data ingestion,
//! artifact writers and the `fit`, `price`, `rebate` and `simulate` commands.

pub mod cli;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod output;

use std::path::PathBuf;

pub use cli::{Cli, Command};
pub use error::CliError;

/// Runs a parsed command line, returning the artifacts written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Fit(args) => commands::run_fit(&args.resolve()?),
        Command::Price(args) => commands::run_price(&args.resolve()?),
        Command::Rebate(args) => commands::run_rebate(&args.resolve()?),
        Command::Simulate(args) => commands::run_simulate(&args.resolve()?),
    }
}
