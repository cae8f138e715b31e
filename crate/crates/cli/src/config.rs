//! Pipeline configuration: a flat key=value file plus command-line overrides.
//!
//! Flags win over file values, which win over defaults. Every run's effective
//! configuration is snapshotted into `manifest.txt`, and all randomness in
//! the pipeline derives from the single `seed` via documented label hashing,
//! so outputs are reproducible from the manifest alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pairlab_core::backtest::log_spaced_grid;
use pairlab_core::estimation::DeConfig;

/// Candidate grid for the entry-threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CGridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Log spacing by default; linear when false.
    pub log_spacing: bool,
}

impl CGridSpec {
    pub fn build(&self) -> Vec<f64> {
        if self.log_spacing {
            log_spaced_grid(self.min, self.max, self.count)
        } else {
            let step = (self.max - self.min) / (self.count - 1) as f64;
            (0..self.count).map(|i| self.min + step * i as f64).collect()
        }
    }
}

/// Effective settings for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Universe CSV (read by scan/fit/backtest, written by simulate).
    pub data_path: PathBuf,
    pub output_dir: PathBuf,
    pub train_fraction: f64,
    /// Places the train/test boundary at an exact index instead of the
    /// fraction (for calendars where the fraction rounds differently).
    pub split_index_override: Option<usize>,
    pub max_lag: usize,
    pub population_size: usize,
    pub max_generations: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub tolerance: f64,
    pub c_grid: CGridSpec,
    pub risk_free_annual: f64,
    pub cost_per_trade: f64,
    pub seed: u64,
    /// Thread count for the data-parallel stages; default lets the pool
    /// decide.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::from("universe.csv"),
            output_dir: PathBuf::from("out"),
            train_fraction: 0.8,
            split_index_override: None,
            max_lag: 10,
            population_size: 40,
            max_generations: 500,
            differential_weight: 0.8,
            crossover_rate: 0.9,
            tolerance: 1e-8,
            c_grid: CGridSpec {
                min: 0.01,
                max: 200.0,
                count: 200,
                log_spacing: true,
            },
            risk_free_annual: 0.074,
            cost_per_trade: 0.0,
            seed: 0,
            workers: None,
        }
    }
}

/// Command-line values that override file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub split_index: Option<usize>,
    pub train_fraction: Option<f64>,
}

impl PipelineConfig {
    /// Loads the file (when given), applies overrides, and validates.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(data) = &overrides.data {
            config.data_path = data.clone();
        }
        if let Some(out) = &overrides.out {
            config.output_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(workers) = overrides.workers {
            config.workers = Some(workers);
        }
        if let Some(split) = overrides.split_index {
            config.split_index_override = Some(split);
        }
        if let Some(fraction) = overrides.train_fraction {
            config.train_fraction = fraction;
        }
        config.validate()?;
        Ok(config)
    }

    /// Parses the flat key=value format; `#` starts a comment, blank lines
    /// are skipped, unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config = Self::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                );
            };
            let (key, value) = (key.trim(), value.trim());
            config
                .set(key, value)
                .with_context(|| format!("{}:{}: key '{key}'", path.display(), lineno + 1))?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| anyhow::anyhow!("cannot parse '{value}': {e}"))
        }
        match key {
            "data" => self.data_path = PathBuf::from(value),
            "out" => self.output_dir = PathBuf::from(value),
            "train_fraction" => self.train_fraction = num(value)?,
            "split_index" => self.split_index_override = Some(num(value)?),
            "max_lag" => self.max_lag = num(value)?,
            "population_size" => self.population_size = num(value)?,
            "max_generations" => self.max_generations = num(value)?,
            "differential_weight" => self.differential_weight = num(value)?,
            "crossover_rate" => self.crossover_rate = num(value)?,
            "tolerance" => self.tolerance = num(value)?,
            "c_min" => self.c_grid.min = num(value)?,
            "c_max" => self.c_grid.max = num(value)?,
            "c_count" => self.c_grid.count = num(value)?,
            "c_log" => self.c_grid.log_spacing = num(value)?,
            "risk_free_annual" => self.risk_free_annual = num(value)?,
            "cost_per_trade" => self.cost_per_trade = num(value)?,
            "seed" => self.seed = num(value)?,
            "workers" => self.workers = Some(num(value)?),
            other => bail!("unknown configuration key '{other}'"),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction {} outside (0, 1)", self.train_fraction);
        }
        if self.max_lag < 1 {
            bail!("max_lag must be at least 1");
        }
        if !(self.c_grid.min > 0.0 && self.c_grid.max >= self.c_grid.min && self.c_grid.count >= 2)
        {
            bail!(
                "c grid [{}, {}] with {} points is invalid",
                self.c_grid.min,
                self.c_grid.max,
                self.c_grid.count
            );
        }
        if self.cost_per_trade < 0.0 {
            bail!("cost_per_trade must be non-negative");
        }
        // Optimizer fields are re-validated by the estimator; fail fast here
        // so bad configs die before any data work.
        self.de_config(0).validate().map_err(anyhow::Error::from)
    }

    /// Optimizer settings with a run-specific seed.
    pub fn de_config(&self, seed: u64) -> DeConfig {
        DeConfig {
            population_size: self.population_size,
            max_generations: self.max_generations,
            differential_weight: self.differential_weight,
            crossover_rate: self.crossover_rate,
            tolerance: self.tolerance,
            seed,
            ..DeConfig::default()
        }
    }

    /// Stable key=value snapshot, one key per line, for the manifest.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "data = {}", self.data_path.display());
        let _ = writeln!(s, "out = {}", self.output_dir.display());
        let _ = writeln!(s, "train_fraction = {}", self.train_fraction);
        match self.split_index_override {
            Some(i) => {
                let _ = writeln!(s, "split_index = {i}");
            }
            None => {
                let _ = writeln!(s, "# split_index unset (train_fraction applies)");
            }
        }
        let _ = writeln!(s, "max_lag = {}", self.max_lag);
        let _ = writeln!(s, "population_size = {}", self.population_size);
        let _ = writeln!(s, "max_generations = {}", self.max_generations);
        let _ = writeln!(s, "differential_weight = {}", self.differential_weight);
        let _ = writeln!(s, "crossover_rate = {}", self.crossover_rate);
        let _ = writeln!(s, "tolerance = {}", self.tolerance);
        let _ = writeln!(s, "c_min = {}", self.c_grid.min);
        let _ = writeln!(s, "c_max = {}", self.c_grid.max);
        let _ = writeln!(s, "c_count = {}", self.c_grid.count);
        let _ = writeln!(s, "c_log = {}", self.c_grid.log_spacing);
        let _ = writeln!(s, "risk_free_annual = {}", self.risk_free_annual);
        let _ = writeln!(s, "cost_per_trade = {}", self.cost_per_trade);
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.workers {
            Some(w) => {
                let _ = writeln!(s, "workers = {w}");
            }
            None => {
                let _ = writeln!(s, "# workers unset (pool default)");
            }
        }
        s
    }
}

/// Derives a task-specific seed from the run seed and a textual label
/// (FNV-1a of the label, XOR-folded with the base seed). Every random stage
/// documents its label, so the whole pipeline reproduces from one seed.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash ^ base
}
