//! Batch command-line front end for the `claimscore` pipeline.
//!
//! `simulate` writes a synthetic portfolio, `fit` estimates the model matrix
//! on the training years, `optimize` tunes claim-score parameters per
//! product, `evaluate` compares models out of sample with ratio Gini indices
//! and likelihood-ratio tests, and `report` tabulates the portfolio.

pub mod args;
pub mod commands;
pub mod config;
pub mod table;

pub use args::{Cli, Command, CommonArgs};
pub use commands::{exit_code, Outcome};
pub use config::{RunConfig, Settings};

use claimscore::Result;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let settings = Settings::resolve(&cli.common)?;
    match cli.command {
        Command::Simulate => commands::simulate(&settings),
        Command::Fit => commands::fit(&settings),
        Command::Optimize => commands::optimize(&settings),
        Command::Evaluate => commands::evaluate(&settings),
        Command::Report => commands::report(&settings),
    }
}
