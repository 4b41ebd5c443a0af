//! `delab`: run the Monte Carlo experiments and numerical checks.
//!
//! Exit codes: 0 success, 1 replay mismatch, 2 usage or configuration error,
//! 3 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delab_core::models::ModelError;
use delab_core::truncation::TruncationError;
use delab_core::HarnessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TruncationError> for CliError {
    fn from(e: TruncationError) -> Self {
        HarnessError::from(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(name = "delab", version, about = "Self-normalized extreme statistics of random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set spec.dim=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and summarize it against the Gumbel law.
    Simulate(Common),
    /// Shifted limit of a critical atom ladder: driver table and median check.
    ShiftExperiment(Common),
    /// Exceedance frequencies across horizons for a law without a limit.
    TightnessProbe(Common),
    /// Integral-test classifier against the partial-sum oracle.
    IntegralTest(Common),
    /// Gaussian tail inequalities.
    TailBounds(Common),
    /// Truncation-level and tail-condition diagnostics.
    Validate(Common),
    /// Recompute one replication and compare it with the stored CSV row.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Replication index.
        #[arg(long)]
        index: u64,
        /// Stored CSV (default `<out>/<name>.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let common = match &cli.command {
        Command::Simulate(c)
        | Command::ShiftExperiment(c)
        | Command::TightnessProbe(c)
        | Command::IntegralTest(c)
        | Command::TailBounds(c)
        | Command::Validate(c) => c,
        Command::Replay { common, .. } => common,
    };
    let table = config::load_table(common.config.as_deref(), &common.set)?;
    match &cli.command {
        Command::Simulate(c) => commands::simulate(table, c)?,
        Command::ShiftExperiment(c) => commands::shift(table, c)?,
        Command::TightnessProbe(c) => commands::tightness(table, c)?,
        Command::IntegralTest(c) => commands::integral_test(table, c)?,
        Command::TailBounds(c) => commands::tail_bounds(table, c)?,
        Command::Validate(c) => commands::validate(table, c)?,
        Command::Replay { common, index, csv } => {
            if !commands::replay_cmd(table, common, *index, csv.as_deref())? {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("delab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
