//! Command-line driver for the pairs-trading research pipeline.
//!
//! One binary, five subcommands: `simulate` writes a synthetic universe,
//! `scan` finds cointegrated pairs, `fit` estimates the latent spread model,
//! `backtest` optimizes the entry threshold and evaluates both segments, and
//! `report` collates per-pair results into the combined train/test tables.
//! Configuration comes from a flat key=value file plus flags (flags win),
//! and every run snapshots its effective settings into `manifest.txt`.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::SimulateSpec;
use crate::config::{Overrides, PipelineConfig};

#[derive(Debug, Parser)]
#[command(
    name = "pairlab",
    version,
    about = "Cointegration scan, spread-model fit, and threshold backtest for commodity pairs"
)]
pub struct Cli {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Universe CSV (read by scan/fit/backtest, written by simulate).
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run seed; all pipeline randomness derives from it.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Thread count for the data-parallel stages.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Exact train/test boundary index, overriding --train-fraction.
    #[arg(long, global = true, value_name = "N")]
    pub split_index: Option<usize>,
    /// Fraction of each series used for training, in (0, 1).
    #[arg(long, global = true, value_name = "F")]
    pub train_fraction: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic universe CSV with planted cointegrated pairs.
    Simulate(SimulateArgs),
    /// Test every pair of series for cointegration on the training segment.
    Scan,
    /// Fit the latent mean-reverting spread model for cointegrated pairs.
    Fit {
        /// Single pair as 'A,B'; default fits every cointegrated pair.
        #[arg(value_name = "PAIR")]
        pair: Option<String>,
    },
    /// Optimize the entry threshold in-sample and backtest both segments.
    Backtest {
        /// Single pair as 'A,B'; default backtests every cointegrated pair.
        #[arg(value_name = "PAIR")]
        pair: Option<String>,
    },
    /// Collate per-pair metrics into combined train/test tables.
    Report,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of planted cointegrated pairs.
    #[arg(long, default_value_t = 3)]
    pub pairs: usize,
    /// Number of independent random-walk series.
    #[arg(long, default_value_t = 6)]
    pub walks: usize,
    /// Observations per series.
    #[arg(long, default_value_t = 2000)]
    pub length: usize,
    /// Mean-reversion speed of the planted spreads, in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Long-run level of the planted spreads.
    #[arg(long, default_value_t = 2.0)]
    pub mu: f64,
    /// Daily process noise of the planted spreads.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Measurement noise on the spread observation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Long-run price relation coefficient; the planted hedge ratio is its
    /// negative.
    #[arg(long, default_value_t = 0.7)]
    pub beta: f64,
    /// Daily volatility of the common log-price walk.
    #[arg(long, default_value_t = 0.05)]
    pub walk_volatility: f64,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            data: self.data.clone(),
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            split_index: self.split_index,
            train_fraction: self.train_fraction,
        }
    }
}

/// Resolves the configuration, sizes the worker pool, and dispatches the
/// subcommand.
pub fn run(cli: &Cli) -> Result<()> {
    let config = PipelineConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    init_workers(&config);
    match &cli.command {
        Command::Simulate(args) => commands::cmd_simulate(
            &config,
            &SimulateSpec {
                pairs: args.pairs,
                walks: args.walks,
                length: args.length,
                kappa: args.kappa,
                mu: args.mu,
                sigma: args.sigma,
                noise: args.noise,
                beta: args.beta,
                walk_volatility: args.walk_volatility,
            },
        ),
        Command::Scan => commands::cmd_scan(&config),
        Command::Fit { pair } => commands::cmd_fit(&config, pair.as_deref()),
        Command::Backtest { pair } => commands::cmd_backtest(&config, pair.as_deref()),
        Command::Report => commands::cmd_report(&config),
    }
}

/// Bounds the global worker pool when `workers` is set. Repeated calls in
/// one process (tests drive `run` directly) keep the first pool; pool size
/// never affects output bytes, only wall time.
#[cfg(feature = "parallel")]
fn init_workers(config: &PipelineConfig) {
    if let Some(n) = config.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_workers(config: &PipelineConfig) {
    if config.workers.is_some() {
        eprintln!("warning: built without the parallel feature; workers setting has no effect");
    }
}
