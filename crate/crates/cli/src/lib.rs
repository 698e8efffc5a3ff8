//! Command-line front end for `szego-core`: JSON-configured λ-sweeps,
//! fractal-set reports and verification suites, written as CSV, plain data
//! files, optional SVG plots and JSON summaries.

pub mod config;
pub mod plot;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, ExperimentConfig};
pub use run::{run_fractal, run_sweep, run_verify, CliError};

#[derive(Debug, Parser)]
#[command(name = "szego", version, about = "Spectral experiments for compressions of discontinuous Fourier multipliers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (overrides the config).
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Reserved; the pipeline is deterministic and does not use it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the spectral pipeline over a λ grid.
    Sweep,
    /// Build Cantor-like sets and report modulus windows and tail exponents.
    Fractal,
    /// Check exact identities and cross-validate the two cross-norm routes.
    Verify,
}

/// Loads the configuration and runs the selected subcommand.
pub fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if cli.command == Command::Verify => ExperimentConfig::from_json(r#"{"schema_version": 1}"#)?,
        None => return Err(ConfigError("`--config` is required for this subcommand".into()).into()),
    };
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("szego-out"));
    match cli.command {
        Command::Sweep => run_sweep(&cfg, &out),
        Command::Fractal => run_fractal(&cfg, &out),
        Command::Verify => run_verify(&cfg, &out),
    }
}
