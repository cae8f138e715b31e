//! The five pipeline subcommands and the artifact plumbing they share.
//!
//! Commands are composable: `backtest` generates any missing scan or fit
//! artifacts on demand by running the same code paths the dedicated
//! subcommands use, so the results are identical either way. `report` only
//! collates existing per-pair outputs; it warns about missing ones and still
//! writes the partial tables. Warnings go to stderr and never change the
//! exit code.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use pairlab_core::backtest::{optimize_c, run_backtest, MetricsConfig, TradingRule};
use pairlab_core::cointegration::{scan_pairs, PairScan};
use pairlab_core::estimation::fit_spread_model;
use pairlab_core::market_data::{align_universe, load_csv, PairDataset, PriceSeries, SplitSpec};
use pairlab_core::simulate::{
    simulate_cointegrated_pair, simulate_random_walk, synthetic_dates, SimSpec,
};
use pairlab_core::spread_model::{build_spread, half_life, kalman_filter, OuParams, SpreadSeries};
use pairlab_core::Error as CoreError;

use crate::config::{derive_seed, PipelineConfig};
use crate::report::{self, pair_slug, FitRow, MetricsRow, ScanRow};
use crate::svg;

/// Shape of the synthetic universe written by the `simulate` subcommand.
#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub pairs: usize,
    pub walks: usize,
    pub length: usize,
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Measurement noise on the spread observation.
    pub noise: f64,
    pub beta: f64,
    pub walk_volatility: f64,
}

/// Generates a universe CSV at the configured data path: `pairs` planted
/// cointegrated pairs (columns `pair<i>_a`, `pair<i>_b`) plus `walks`
/// independent random walks (columns `walk<i>`), all on one synthetic
/// calendar. Seeds derive from the run seed via the labels
/// `simulate:pair:<i>` and `simulate:walk:<i>`.
pub fn cmd_simulate(config: &PipelineConfig, sim: &SimulateSpec) -> Result<()> {
    if sim.pairs == 0 && sim.walks == 0 {
        bail!("nothing to simulate: need at least one pair or walk");
    }
    let ou = OuParams::new(sim.kappa, sim.mu, sim.sigma, sim.noise)?;
    let mut series: Vec<PriceSeries> = Vec::with_capacity(2 * sim.pairs + sim.walks);
    for i in 0..sim.pairs {
        let spec = SimSpec {
            ou,
            length: sim.length,
            seed: derive_seed(config.seed, &format!("simulate:pair:{i}")),
            initial_state: sim.mu,
            beta: sim.beta,
            walk_volatility: sim.walk_volatility,
        };
        let (mut a, mut b) = simulate_cointegrated_pair(&spec)?;
        a.commodity_id = format!("pair{i}_a");
        b.commodity_id = format!("pair{i}_b");
        series.push(a);
        series.push(b);
    }
    for i in 0..sim.walks {
        series.push(simulate_random_walk(
            &format!("walk{i}"),
            sim.length,
            derive_seed(config.seed, &format!("simulate:walk:{i}")),
            sim.walk_volatility,
        )?);
    }

    if let Some(parent) = config.data_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_universe_csv(config, &series, sim.length)?;
    prepare_output_dir(config)?;
    write_manifest(config, "simulate")?;
    println!(
        "wrote {}: {} series x {} rows ({} planted pairs, {} walks)",
        config.data_path.display(),
        series.len(),
        sim.length,
        sim.pairs,
        sim.walks
    );
    Ok(())
}

/// Wide CSV in the ingestion schema: `date` column plus one raw-price column
/// per commodity, shared calendar.
fn write_universe_csv(
    config: &PipelineConfig,
    series: &[PriceSeries],
    length: usize,
) -> Result<()> {
    let dates = synthetic_dates(length);
    let mut writer = csv::Writer::from_path(&config.data_path)
        .with_context(|| format!("cannot create {}", config.data_path.display()))?;
    let mut header = vec!["date".to_string()];
    header.extend(series.iter().map(|s| s.commodity_id.clone()));
    writer.write_record(&header)?;
    for (t, date) in dates.iter().enumerate() {
        let mut row = vec![date.to_string()];
        row.extend(series.iter().map(|s| s.log_prices[t].exp().to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Tests every unordered pair in the universe on its training segment and
/// writes `scan.csv`; prints one line per cointegrated pair.
pub fn cmd_scan(config: &PipelineConfig) -> Result<()> {
    prepare_output_dir(config)?;
    run_scan(config)?;
    write_manifest(config, "scan")?;
    Ok(())
}

fn run_scan(config: &PipelineConfig) -> Result<PairScan> {
    let universe = load_universe(config)?;
    let scan = scan_pairs(&universe, split_spec(config), config.max_lag)?;
    report::write_scan_csv(&scan_path(config), &scan)?;
    for failure in &scan.failures {
        eprintln!(
            "warning: pair {},{} skipped: {}",
            failure.series_a, failure.series_b, failure.error
        );
    }
    println!(
        "scanned {} pairs: {} cointegrated, {} failed",
        scan.tested.len(),
        scan.cointegrated().count(),
        scan.failures.len()
    );
    for pair in scan.cointegrated() {
        let hedge = pair
            .result
            .hedge_ratio
            .expect("cointegrated pairs have a hedge ratio");
        println!("  {},{}  hedge {hedge:.6}", pair.series_a, pair.series_b);
    }
    Ok(scan)
}

/// Fits the latent spread model for one pair (or every cointegrated pair)
/// on the training segment; writes `fit_<pair>.csv` and a training-segment
/// state dump `states_<pair>.csv`.
pub fn cmd_fit(config: &PipelineConfig, pair: Option<&str>) -> Result<()> {
    prepare_output_dir(config)?;
    let rows = ensure_scan(config)?;
    let targets = select_pairs(&rows, pair)?;
    if targets.is_empty() {
        println!("no cointegrated pairs to fit");
        write_manifest(config, "fit")?;
        return Ok(());
    }
    let universe = load_universe(config)?;
    for row in &targets {
        fit_pair(config, &universe, row)?;
    }
    write_manifest(config, "fit")?;
    Ok(())
}

/// Optimizes the entry threshold on the training segment and backtests both
/// segments for one pair (or every cointegrated pair); writes per-pair
/// metrics, equity CSVs, and equity SVGs.
pub fn cmd_backtest(config: &PipelineConfig, pair: Option<&str>) -> Result<()> {
    prepare_output_dir(config)?;
    let rows = ensure_scan(config)?;
    let targets = select_pairs(&rows, pair)?;
    if targets.is_empty() {
        println!("no cointegrated pairs to backtest");
        write_manifest(config, "backtest")?;
        return Ok(());
    }
    let universe = load_universe(config)?;
    let grid = config.c_grid.build();
    let metrics = metrics_config(config);
    for row in &targets {
        backtest_pair(config, &universe, row, &grid, &metrics)?;
    }
    write_manifest(config, "backtest")?;
    Ok(())
}

/// Collates the per-pair metrics files into `backtest_train.csv` and
/// `backtest_test.csv`, preserving scan order. Pairs without outputs are
/// listed on stderr and skipped; the partial tables are still written.
pub fn cmd_report(config: &PipelineConfig) -> Result<()> {
    prepare_output_dir(config)?;
    let scan_file = scan_path(config);
    if !scan_file.exists() {
        bail!(
            "no scan results at {}; run the scan or backtest subcommand first",
            scan_file.display()
        );
    }
    let rows = report::read_scan_csv(&scan_file)?;
    let mut train_rows: Vec<MetricsRow> = Vec::new();
    let mut test_rows: Vec<MetricsRow> = Vec::new();
    for row in rows.iter().filter(|r| r.hedge_ratio.is_some()) {
        let slug = pair_slug(&row.pair_a, &row.pair_b);
        let train_path = metrics_path(config, &slug, "train");
        if !train_path.exists() {
            eprintln!(
                "warning: pair {},{} has no backtest output; excluded from the report",
                row.pair_a, row.pair_b
            );
            continue;
        }
        train_rows.push(report::read_metrics_csv(&train_path)?);
        let test_path = metrics_path(config, &slug, "test");
        if test_path.exists() {
            test_rows.push(report::read_metrics_csv(&test_path)?);
        } else {
            eprintln!(
                "warning: pair {},{} has no testing-segment output",
                row.pair_a, row.pair_b
            );
        }
    }
    report::write_segment_report(&config.output_dir.join("backtest_train.csv"), &train_rows)?;
    report::write_segment_report(&config.output_dir.join("backtest_test.csv"), &test_rows)?;
    println!(
        "wrote combined report: {} train rows, {} test rows",
        train_rows.len(),
        test_rows.len()
    );
    write_manifest(config, "report")?;
    Ok(())
}

fn prepare_output_dir(config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create output dir {}", config.output_dir.display()))
}

/// Every command records the effective configuration, so any artifact in the
/// output directory can be regenerated byte-for-byte from the manifest.
fn write_manifest(config: &PipelineConfig, command: &str) -> Result<()> {
    let text = format!(
        "toolkit_version = {}\ncommand = {}\n{}",
        env!("CARGO_PKG_VERSION"),
        command,
        config.snapshot()
    );
    let path = config.output_dir.join("manifest.txt");
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn split_spec(config: &PipelineConfig) -> SplitSpec {
    match config.split_index_override {
        Some(index) => SplitSpec::Index(index),
        None => SplitSpec::Fraction(config.train_fraction),
    }
}

fn metrics_config(config: &PipelineConfig) -> MetricsConfig {
    MetricsConfig {
        risk_free_annual: config.risk_free_annual,
        cost_per_trade: config.cost_per_trade,
        ..MetricsConfig::default()
    }
}

fn load_universe(config: &PipelineConfig) -> Result<Vec<PriceSeries>> {
    let raw = load_csv(&config.data_path.to_string_lossy())?;
    Ok(align_universe(&raw)?)
}

fn scan_path(config: &PipelineConfig) -> PathBuf {
    config.output_dir.join("scan.csv")
}

fn fit_path(config: &PipelineConfig, slug: &str) -> PathBuf {
    config.output_dir.join(format!("fit_{slug}.csv"))
}

fn states_path(config: &PipelineConfig, slug: &str) -> PathBuf {
    config.output_dir.join(format!("states_{slug}.csv"))
}

fn metrics_path(config: &PipelineConfig, slug: &str, segment: &str) -> PathBuf {
    config
        .output_dir
        .join(format!("metrics_{slug}_{segment}.csv"))
}

fn equity_path(config: &PipelineConfig, slug: &str, segment: &str, ext: &str) -> PathBuf {
    config
        .output_dir
        .join(format!("equity_{slug}_{segment}.{ext}"))
}

/// Runs the scan only when `scan.csv` is absent, then reads it back. Float
/// columns are written in shortest-round-trip decimal, so the read recovers
/// the exact values a fresh scan would produce.
fn ensure_scan(config: &PipelineConfig) -> Result<Vec<ScanRow>> {
    let path = scan_path(config);
    if !path.exists() {
        run_scan(config)?;
    }
    report::read_scan_csv(&path)
}

/// Picks the pairs a command operates on: the explicit `A,B` argument (which
/// must be a cointegrated scan entry) or every cointegrated pair.
fn select_pairs(rows: &[ScanRow], pair: Option<&str>) -> Result<Vec<ScanRow>> {
    match pair {
        Some(arg) => {
            let (a, b) = parse_pair_arg(arg)?;
            let row = rows
                .iter()
                .find(|r| r.pair_a == a && r.pair_b == b)
                .ok_or_else(|| {
                    anyhow!("unknown pair {a},{b}: not present in the scan results")
                })?;
            if row.hedge_ratio.is_none() {
                bail!("pair {a},{b} is not cointegrated (rank 0); no spread to model");
            }
            Ok(vec![row.clone()])
        }
        None => Ok(rows
            .iter()
            .filter(|r| r.hedge_ratio.is_some())
            .cloned()
            .collect()),
    }
}

fn parse_pair_arg(arg: &str) -> Result<(String, String)> {
    let mut parts = arg.split(',').map(str::trim);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
            Ok((a.to_string(), b.to_string()))
        }
        _ => bail!("pair argument must be two comma-separated ids, e.g. 'Aluminium,Lead'"),
    }
}

fn find_series<'a>(universe: &'a [PriceSeries], id: &str) -> Result<&'a PriceSeries> {
    universe
        .iter()
        .find(|s| s.commodity_id == id)
        .ok_or_else(|| anyhow!("series '{id}' not found in the data file"))
}

fn pair_dataset(
    config: &PipelineConfig,
    universe: &[PriceSeries],
    a: &str,
    b: &str,
) -> Result<PairDataset> {
    let series_a = find_series(universe, a)?.clone();
    let series_b = find_series(universe, b)?.clone();
    Ok(split_spec(config).apply(series_a, series_b)?)
}

/// Label the per-pair optimizer seed derives from; documented so runs are
/// reproducible from the manifest alone.
fn fit_seed_label(a: &str, b: &str) -> String {
    format!("fit:{a},{b}")
}

/// Fits the model on the training spread and writes the fit report plus the
/// training-segment state dump; filtered and smoothed states both use only
/// training data, matching what the fit saw.
fn fit_pair(config: &PipelineConfig, universe: &[PriceSeries], row: &ScanRow) -> Result<FitRow> {
    let hedge = row
        .hedge_ratio
        .ok_or_else(|| anyhow!("pair {},{} has no hedge ratio", row.pair_a, row.pair_b))?;
    let train = training_spread(config, universe, row, hedge)?;
    let de = config.de_config(derive_seed(
        config.seed,
        &fit_seed_label(&row.pair_a, &row.pair_b),
    ));
    let fit = fit_spread_model(&train, &de)
        .with_context(|| format!("fit failed for pair {},{}", row.pair_a, row.pair_b))?;
    let times = half_life(fit.ou_params.kappa)?;
    let fit_row = FitRow {
        commodity1: row.pair_a.clone(),
        commodity2: row.pair_b.clone(),
        x: fit.best_params.x,
        y: fit.best_params.y,
        z: fit.best_params.z,
        v: fit.best_params.v,
        kappa: fit.ou_params.kappa,
        mu: fit.ou_params.mu,
        sigma: fit.ou_params.sigma,
        half_life_days: times.half_life,
        e_folding_days: times.e_folding,
        log_likelihood: fit.log_likelihood,
        generations: fit.generations_run,
        converged: fit.converged,
    };
    let slug = pair_slug(&row.pair_a, &row.pair_b);
    report::write_fit_csv(&fit_path(config, &slug), &fit_row)?;
    let states = kalman_filter(&train, &fit.best_params)?;
    report::write_states_csv(&states_path(config, &slug), &train, &states)?;
    println!(
        "fitted {},{}: kappa {:.6} mu {:.6} sigma {:.6} v {:.6} ll {:.4} ({} generations, converged {})",
        row.pair_a,
        row.pair_b,
        fit_row.kappa,
        fit_row.mu,
        fit_row.sigma,
        fit_row.v,
        fit_row.log_likelihood,
        fit_row.generations,
        fit_row.converged
    );
    Ok(fit_row)
}

fn training_spread(
    config: &PipelineConfig,
    universe: &[PriceSeries],
    row: &ScanRow,
    hedge: f64,
) -> Result<SpreadSeries> {
    let dataset = pair_dataset(config, universe, &row.pair_a, &row.pair_b)?;
    let spread = build_spread(&dataset, hedge)?;
    Ok(spread.slice(0..dataset.split_index))
}

/// Reuses an existing fit file (read back to the exact stored floats) or
/// produces one on the spot.
fn ensure_fit(
    config: &PipelineConfig,
    universe: &[PriceSeries],
    row: &ScanRow,
) -> Result<FitRow> {
    let path = fit_path(config, &pair_slug(&row.pair_a, &row.pair_b));
    if path.exists() {
        report::read_fit_csv(&path)
    } else {
        fit_pair(config, universe, row)
    }
}

fn backtest_pair(
    config: &PipelineConfig,
    universe: &[PriceSeries],
    row: &ScanRow,
    grid: &[f64],
    metrics: &MetricsConfig,
) -> Result<()> {
    let hedge = row
        .hedge_ratio
        .ok_or_else(|| anyhow!("pair {},{} has no hedge ratio", row.pair_a, row.pair_b))?;
    let fit = ensure_fit(config, universe, row)?;
    let ou = OuParams::new(fit.kappa, fit.mu, fit.sigma, fit.v)?;
    let dataset = pair_dataset(config, universe, &row.pair_a, &row.pair_b)?;
    let spread = build_spread(&dataset, hedge)?;
    let train = spread.slice(0..dataset.split_index);
    let test = spread.slice(dataset.split_index..spread.len());

    let c = match optimize_c(&train, &ou, grid, metrics) {
        Ok((c, _)) => c,
        // A rule that never triggers mirrors a dash row in the combined
        // report: keep the smallest candidate and emit zero-trade metrics.
        Err(CoreError::NoTrades) => {
            eprintln!(
                "warning: pair {},{} never trades on the training segment; reporting zero trades",
                row.pair_a, row.pair_b
            );
            grid[0]
        }
        Err(e) => return Err(e.into()),
    };

    let rule = TradingRule::from_ou(c, &ou);
    let train_report = run_backtest(&train, &rule, metrics)?;
    let test_report = if test.len() >= 2 {
        Some(run_backtest(&test, &rule, metrics)?)
    } else {
        eprintln!(
            "warning: pair {},{} testing segment is too short to backtest",
            row.pair_a, row.pair_b
        );
        None
    };

    let slug = pair_slug(&row.pair_a, &row.pair_b);
    write_segment_artifacts(config, row, &slug, "train", &train, &train_report)?;
    if let Some(ref report) = test_report {
        write_segment_artifacts(config, row, &slug, "test", &test, report)?;
    }
    println!(
        "backtested {},{}: c {:.4}, train Sharpe {}, test Sharpe {}",
        row.pair_a,
        row.pair_b,
        c,
        display_sharpe(Some(&train_report)),
        display_sharpe(test_report.as_ref())
    );
    Ok(())
}

fn display_sharpe(report: Option<&pairlab_core::backtest::BacktestReport>) -> String {
    match report.and_then(|r| r.sharpe) {
        Some(s) => format!("{s:.2}"),
        None => "-".to_string(),
    }
}

fn write_segment_artifacts(
    config: &PipelineConfig,
    row: &ScanRow,
    slug: &str,
    segment: &str,
    spread: &SpreadSeries,
    report_data: &pairlab_core::backtest::BacktestReport,
) -> Result<()> {
    let metrics_row = MetricsRow::from_report(&row.pair_a, &row.pair_b, report_data);
    report::write_metrics_csv(&metrics_path(config, slug, segment), &metrics_row)?;
    report::write_equity_csv(
        &equity_path(config, slug, segment, "csv"),
        &spread.dates,
        &report_data.equity_curve,
    )?;
    let title = format!(
        "{} / {} cumulative return ({segment})",
        row.pair_a, row.pair_b
    );
    let chart = svg::line_chart(&title, &spread.dates, &report_data.equity_curve);
    let path = equity_path(config, slug, segment, "svg");
    fs::write(&path, chart).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
