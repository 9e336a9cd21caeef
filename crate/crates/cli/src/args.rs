//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "claimscore", version, about = "Multi-product claim-score ratemaking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic portfolio, its schema and a claims history.
    Simulate,
    /// Fit every requested model on the training years and write coefficient tables.
    Fit,
    /// Grid-search claim-score parameters per product.
    Optimize,
    /// Ratio Gini matrices, mini-max ranks and likelihood-ratio tests.
    Evaluate,
    /// Portfolio summary and product overlap tables.
    Report,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Policy records CSV (default: <out>/records.csv).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Schema JSON (default: <out>/schema.json).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Pre-sample claims history CSV (default: <out>/history.csv when present).
    #[arg(long, global = true)]
    pub history: Option<PathBuf>,
    /// Output directory (default: claimscore-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Simulator seed (overrides `simulation.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Comma-separated model abbreviations, e.g. GLM-PG,GAM-NBG-One.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Static benchmark model for the grid search.
    #[arg(long, global = true)]
    pub benchmark: Option<String>,
}
