//! Command-line surface: argument parsing, config resolution, and dispatch.

pub mod commands;
pub mod config;
pub mod panel_io;

pub use commands::{
    cmd_estimate, cmd_forecast_eval, cmd_replicate, cmd_simulate, run_estimate, run_forecast_eval,
    run_replicate, run_simulate, FitReport, ForecastEvalReport, ReplicateReport, TruthReport,
    SCHEMA_VERSION,
};
pub use config::{Design, RunConfig};

use crate::error::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "splash",
    about = "Sparse spatio-temporal VAR estimation via penalized Yule-Walker equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonOpts {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override any config key, e.g. --set t=500 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Fill missing panel cells by per-unit linear interpolation in time.
    #[arg(long)]
    pub interpolate: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel from a built-in design; writes panel.csv and truth.json.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit the penalized Yule-Walker estimator to a panel CSV; writes fit.json.
    Estimate {
        panel: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Monte Carlo study over the configured estimators; writes table.{json,csv}.
    Replicate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rolling-window forecast comparison on a panel CSV; writes forecast_table.{json,csv}.
    ForecastEval {
        panel: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn resolve_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.interpolate {
        cfg.interpolate = true;
    }
    for kv in &common.overrides {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            crate::error::Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{kv}'"))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common } => cmd_simulate(&resolve_config(common)?, &common.out),
        Command::Estimate { panel, common } => {
            cmd_estimate(&resolve_config(common)?, panel, &common.out)
        }
        Command::Replicate { common } => cmd_replicate(&resolve_config(common)?, &common.out),
        Command::ForecastEval { panel, common } => {
            cmd_forecast_eval(&resolve_config(common)?, panel, &common.out)
        }
    }
}
