//! CSV artifacts: scan results, fit reports, state dumps, per-pair metrics,
//! combined segment tables, and equity curves.
//!
//! Per-pair files store raw full-precision values (shortest round-trip
//! decimal, so reading them back recovers the exact f64). The combined
//! segment tables are presentation-formatted to mirror a results table:
//! two decimals, percentages for CAGR/drawdown, `-` for absent values.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use pairlab_core::backtest::BacktestReport;
use pairlab_core::cointegration::PairScan;
use pairlab_core::spread_model::{KalmanOutput, SpreadSeries};

/// File-name-safe form of a commodity id: alphanumerics kept, everything
/// else mapped to '-'.
pub fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

/// File-name stem for one pair.
pub fn pair_slug(a: &str, b: &str) -> String {
    format!("{}__{}", slug(a), slug(b))
}

/// One row of `scan.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub pair_a: String,
    pub pair_b: String,
    pub lag: usize,
    pub eigen1: f64,
    pub eigen2: f64,
    pub trace_r0: f64,
    pub crit_r0_5pct: f64,
    pub trace_r1: f64,
    pub crit_r1_5pct: f64,
    pub rank: usize,
    pub hedge_ratio: Option<f64>,
}

const SCAN_HEADER: [&str; 11] = [
    "pair_a",
    "pair_b",
    "lag",
    "eigen1",
    "eigen2",
    "trace_r0",
    "crit_r0_5pct",
    "trace_r1",
    "crit_r1_5pct",
    "rank",
    "hedge_ratio",
];

/// Writes every tested pair, cointegrated or not; absent hedge ratios
/// (rank 0) appear as `-`.
pub fn write_scan_csv(path: &Path, scan: &PairScan) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(SCAN_HEADER)?;
    for pair in &scan.tested {
        let r = &pair.result;
        writer.write_record([
            pair.series_a.as_str(),
            pair.series_b.as_str(),
            &r.lag_order.to_string(),
            &r.eigenvalues[0].to_string(),
            &r.eigenvalues[1].to_string(),
            &r.trace_statistics[0].to_string(),
            &r.critical_values_5pct[0].to_string(),
            &r.trace_statistics[1].to_string(),
            &r.critical_values_5pct[1].to_string(),
            &r.rank.to_string(),
            &opt_raw(r.hedge_ratio),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<ScanRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != SCAN_HEADER.len() {
            bail!(
                "{}: expected {} columns, got {}",
                path.display(),
                SCAN_HEADER.len(),
                record.len()
            );
        }
        rows.push(ScanRow {
            pair_a: record[0].to_string(),
            pair_b: record[1].to_string(),
            lag: record[2].parse()?,
            eigen1: record[3].parse()?,
            eigen2: record[4].parse()?,
            trace_r0: record[5].parse()?,
            crit_r0_5pct: record[6].parse()?,
            trace_r1: record[7].parse()?,
            crit_r1_5pct: record[8].parse()?,
            rank: record[9].parse()?,
            hedge_ratio: parse_opt(&record[10])?,
        });
    }
    Ok(rows)
}

/// One `fit_<pair>.csv` row: both parameterizations plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub commodity1: String,
    pub commodity2: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Days for a deviation's expectation to halve, ln(2)/kappa.
    pub half_life_days: f64,
    /// Days for a deviation to shrink by factor e, 1/kappa.
    pub e_folding_days: f64,
    pub log_likelihood: f64,
    pub generations: usize,
    pub converged: bool,
}

const FIT_HEADER: [&str; 14] = [
    "commodity1",
    "commodity2",
    "x",
    "y",
    "z",
    "v",
    "kappa",
    "mu",
    "sigma",
    "half_life_days",
    "e_folding_days",
    "log_likelihood",
    "generations",
    "converged",
];

pub fn write_fit_csv(path: &Path, row: &FitRow) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(FIT_HEADER)?;
    writer.write_record([
        row.commodity1.as_str(),
        row.commodity2.as_str(),
        &row.x.to_string(),
        &row.y.to_string(),
        &row.z.to_string(),
        &row.v.to_string(),
        &row.kappa.to_string(),
        &row.mu.to_string(),
        &row.sigma.to_string(),
        &row.half_life_days.to_string(),
        &row.e_folding_days.to_string(),
        &row.log_likelihood.to_string(),
        &row.generations.to_string(),
        &row.converged.to_string(),
    ])?;
    writer.flush()?;
    Ok(())
}

pub fn read_fit_csv(path: &Path) -> Result<FitRow> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let record = reader
        .records()
        .next()
        .ok_or_else(|| anyhow!("{}: no data row", path.display()))??;
    if record.len() != FIT_HEADER.len() {
        bail!(
            "{}: expected {} columns, got {}",
            path.display(),
            FIT_HEADER.len(),
            record.len()
        );
    }
    Ok(FitRow {
        commodity1: record[0].to_string(),
        commodity2: record[1].to_string(),
        x: record[2].parse()?,
        y: record[3].parse()?,
        z: record[4].parse()?,
        v: record[5].parse()?,
        kappa: record[6].parse()?,
        mu: record[7].parse()?,
        sigma: record[8].parse()?,
        half_life_days: record[9].parse()?,
        e_folding_days: record[10].parse()?,
        log_likelihood: record[11].parse()?,
        generations: record[12].parse()?,
        converged: record[13].parse()?,
    })
}

/// Dumps the spread with filtered/smoothed state estimates.
pub fn write_states_csv(path: &Path, spread: &SpreadSeries, states: &KalmanOutput) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record([
        "date",
        "spread",
        "filtered_mean",
        "filtered_var",
        "smoothed_mean",
        "smoothed_var",
    ])?;
    for t in 0..spread.len() {
        writer.write_record([
            spread.dates[t].to_string(),
            spread.values[t].to_string(),
            states.filtered_means[t].to_string(),
            states.filtered_variances[t].to_string(),
            states.smoothed_means[t].to_string(),
            states.smoothed_variances[t].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One pair's metrics for one segment; raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub commodity1: String,
    pub commodity2: String,
    pub c: f64,
    pub sharpe: Option<f64>,
    pub cagr: Option<f64>,
    pub max_drawdown: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub n_long: usize,
    pub n_short: usize,
}

impl MetricsRow {
    pub fn from_report(commodity1: &str, commodity2: &str, report: &BacktestReport) -> Self {
        Self {
            commodity1: commodity1.to_string(),
            commodity2: commodity2.to_string(),
            c: report.c,
            sharpe: report.sharpe,
            cagr: report.cagr,
            max_drawdown: report.max_drawdown,
            skewness: report.skewness,
            kurtosis: report.kurtosis,
            n_long: report.n_long,
            n_short: report.n_short,
        }
    }
}

const METRICS_HEADER: [&str; 10] = [
    "commodity1",
    "commodity2",
    "c",
    "SR",
    "CAGR",
    "max_drawdown",
    "skew",
    "kurt",
    "n_long",
    "n_short",
];

/// Writes one pair-segment metrics file with full-precision values.
pub fn write_metrics_csv(path: &Path, row: &MetricsRow) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(METRICS_HEADER)?;
    writer.write_record([
        row.commodity1.as_str(),
        row.commodity2.as_str(),
        &row.c.to_string(),
        &opt_raw(row.sharpe),
        &opt_raw(row.cagr),
        &row.max_drawdown.to_string(),
        &row.skewness.to_string(),
        &row.kurtosis.to_string(),
        &row.n_long.to_string(),
        &row.n_short.to_string(),
    ])?;
    writer.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<MetricsRow> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let record = reader
        .records()
        .next()
        .ok_or_else(|| anyhow!("{}: no data row", path.display()))??;
    if record.len() != METRICS_HEADER.len() {
        bail!(
            "{}: expected {} columns, got {}",
            path.display(),
            METRICS_HEADER.len(),
            record.len()
        );
    }
    Ok(MetricsRow {
        commodity1: record[0].to_string(),
        commodity2: record[1].to_string(),
        c: record[2].parse()?,
        sharpe: parse_opt(&record[3])?,
        cagr: parse_opt(&record[4])?,
        max_drawdown: record[5].parse()?,
        skewness: record[6].parse()?,
        kurtosis: record[7].parse()?,
        n_long: record[8].parse()?,
        n_short: record[9].parse()?,
    })
}

/// Writes the combined presentation table for one segment: two decimals,
/// CAGR and drawdown as percentages, `-` for absent values.
pub fn write_segment_report(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(METRICS_HEADER)?;
    for row in rows {
        writer.write_record([
            row.commodity1.as_str(),
            row.commodity2.as_str(),
            &format!("{:.2}", row.c),
            &opt_fixed2(row.sharpe),
            &opt_pct2(row.cagr),
            &format!("{:.2}%", row.max_drawdown * 100.0),
            &format!("{:.2}", row.skewness),
            &format!("{:.2}", row.kurtosis),
            &row.n_long.to_string(),
            &row.n_short.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Equity curve as `date,equity` rows, full precision.
pub fn write_equity_csv(path: &Path, dates: &[NaiveDate], equity: &[f64]) -> Result<()> {
    if dates.len() != equity.len() {
        bail!(
            "{}: {} dates vs {} equity points",
            path.display(),
            dates.len(),
            equity.len()
        );
    }
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(["date", "equity"])?;
    for (date, value) in dates.iter().zip(equity) {
        writer.write_record([date.to_string(), value.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field == "-" {
        Ok(None)
    } else {
        Ok(Some(field.parse()?))
    }
}

fn opt_raw(value: Option<f64>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => "-".to_string(),
    }
}

fn opt_fixed2(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

fn opt_pct2(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "-".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_row_round_trips_with_absent_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics_a__b_train.csv");
        let row = MetricsRow {
            commodity1: "a".into(),
            commodity2: "b".into(),
            c: 80.6,
            sharpe: None,
            cagr: Some(0.1261),
            max_drawdown: -0.14,
            skewness: 0.6,
            kurtosis: 6.23,
            n_long: 39,
            n_short: 71,
        };
        write_metrics_csv(&path, &row).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), row);
    }

    #[test]
    fn segment_report_formats_like_a_results_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("backtest_train.csv");
        let rows = vec![
            MetricsRow {
                commodity1: "Aluminium".into(),
                commodity2: "Lead".into(),
                c: 80.6,
                sharpe: Some(1.46),
                cagr: Some(0.1261),
                max_drawdown: -0.14,
                skewness: 0.6,
                kurtosis: 6.23,
                n_long: 39,
                n_short: 71,
            },
            MetricsRow {
                commodity1: "Silver".into(),
                commodity2: "Guargum".into(),
                c: 139.78,
                sharpe: None,
                cagr: Some(0.0),
                max_drawdown: 0.0,
                skewness: 0.0,
                kurtosis: 0.0,
                n_long: 0,
                n_short: 0,
            },
        ];
        write_segment_report(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "commodity1,commodity2,c,SR,CAGR,max_drawdown,skew,kurt,n_long,n_short"
        );
        assert_eq!(lines[1], "Aluminium,Lead,80.60,1.46,12.61%,-14.00%,0.60,6.23,39,71");
        assert_eq!(lines[2], "Silver,Guargum,139.78,-,0.00%,0.00%,0.00,0.00,0,0");
    }

    #[test]
    fn slugs_are_filename_safe() {
        assert_eq!(slug("Natural Gas"), "Natural-Gas");
        assert_eq!(pair_slug("a/b", "c d"), "a-b__c-d");
    }
}
