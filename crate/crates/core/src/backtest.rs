//! Threshold trading rule, performance metrics, and entry-multiplier search.
//!
//! The rule shorts one unit of spread when the observation sits at or above
//! `mu + c * sigma / sqrt(2 kappa)`, goes long below the mirrored band, and
//! exits when the spread crosses back within `exit_epsilon * s_t` of `mu`
//! (checked before entries on the same close). P&L is measured in log-spread
//! points on one unit of notional; the equity curve starts at 1.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::exec;
use crate::market_data::PairDataset;
use crate::spread_model::{build_spread, OuParams, SpreadSeries};

/// Trading days per year used for annualization throughout.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Exit-boundary factor of the rule's mean-crossing conditions.
pub const DEFAULT_EXIT_EPSILON: f64 = 0.0001;

/// Default risk-free rate: the 10-year sovereign yield the Sharpe ratio is
/// measured against.
pub const DEFAULT_RISK_FREE_ANNUAL: f64 = 0.074;

/// Which side of the spread a trade holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LongSpread,
    ShortSpread,
}

/// Entry/exit thresholds for one spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradingRule {
    /// Entry threshold multiplier, non-negative.
    pub c: f64,
    /// Exit boundary factor; exits fire within `exit_epsilon * s_t` of `mu`.
    pub exit_epsilon: f64,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl TradingRule {
    /// Builds the rule from fitted spread parameters with the standard exit
    /// epsilon.
    pub fn from_ou(c: f64, ou: &OuParams) -> Self {
        Self {
            c,
            exit_epsilon: DEFAULT_EXIT_EPSILON,
            mu: ou.mu,
            kappa: ou.kappa,
            sigma: ou.sigma,
        }
    }

    /// Half-width of the entry band, `c * sigma / sqrt(2 kappa)`.
    pub fn band_half_width(&self) -> f64 {
        self.c * self.sigma / (2.0 * self.kappa).sqrt()
    }

    /// Checks finiteness and that a positive `c` yields a positive band.
    pub fn validate(&self) -> Result<()> {
        let band = self.band_half_width();
        if !(self.c >= 0.0)
            || !self.mu.is_finite()
            || !self.exit_epsilon.is_finite()
            || !band.is_finite()
        {
            return Err(Error::ConstraintViolation(format!(
                "rule parameters must be finite with c >= 0 (c={}, mu={}, band={band})",
                self.c, self.mu
            )));
        }
        if self.c > 0.0 && !(band > 0.0) {
            return Err(Error::ConstraintViolation(format!(
                "entry band {band} must be positive when c = {} > 0",
                self.c
            )));
        }
        Ok(())
    }
}

/// One round trip in the spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub direction: Direction,
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
    pub entry_spread: f64,
    pub exit_spread: f64,
    /// Long: exit - entry; short: entry - exit. Log-spread points.
    pub pnl: f64,
}

/// Runs the threshold rule over a spread.
///
/// Returns the trade log and the end-of-day position series (-1 short, 0
/// flat, +1 long; the day-t position earns the day-(t+1) spread move). Exits
/// are evaluated before entries on each close, a position never reverses in
/// one step, no entry is taken on the final observation, and any position
/// still open on the final observation is force-closed there.
pub fn run_rule(spread: &SpreadSeries, rule: &TradingRule) -> Result<(Vec<Trade>, Vec<i8>)> {
    rule.validate()?;
    let s = &spread.values;
    let n = s.len();
    if n == 0 {
        return Err(Error::TooShort("empty spread".to_string()));
    }

    let band = rule.band_half_width();
    let upper = rule.mu + band;
    let lower = rule.mu - band;

    let mut positions = vec![0i8; n];
    let mut trades = Vec::new();
    let mut open: Option<(Direction, usize)> = None;

    for t in 0..n {
        match open {
            Some((direction, entry)) => {
                let exit_hit = match direction {
                    Direction::ShortSpread => s[t] <= rule.mu + rule.exit_epsilon * s[t],
                    Direction::LongSpread => s[t] >= rule.mu - rule.exit_epsilon * s[t],
                };
                if exit_hit || t == n - 1 {
                    let pnl = match direction {
                        Direction::LongSpread => s[t] - s[entry],
                        Direction::ShortSpread => s[entry] - s[t],
                    };
                    trades.push(Trade {
                        direction,
                        entry_date: spread.dates[entry],
                        exit_date: spread.dates[t],
                        entry_spread: s[entry],
                        exit_spread: s[t],
                        pnl,
                    });
                    open = None;
                    positions[t] = 0;
                } else {
                    positions[t] = match direction {
                        Direction::LongSpread => 1,
                        Direction::ShortSpread => -1,
                    };
                }
            }
            None => {
                // An entry on the final observation could only force-close
                // at the same price, so it is never taken.
                if t < n - 1 {
                    if s[t] >= upper {
                        open = Some((Direction::ShortSpread, t));
                        positions[t] = -1;
                    } else if s[t] <= lower {
                        open = Some((Direction::LongSpread, t));
                        positions[t] = 1;
                    }
                }
            }
        }
    }

    Ok((trades, positions))
}

/// How maximum drawdown is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawdownMode {
    /// Worst drop below the running peak in cumulative-P&L points.
    #[default]
    Points,
    /// Worst drop relative to the running peak (requires positive equity).
    Relative,
}

/// Streaming maximum drawdown in cumulative-P&L points: the most negative
/// value of `equity_t - max_{u<=t} equity_u`. Zero for non-decreasing curves.
pub fn max_drawdown_points(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.min(e - peak);
    }
    worst
}

/// Streaming maximum drawdown relative to the running peak.
pub fn max_drawdown_relative(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.min((e - peak) / peak);
    }
    worst
}

/// Metric computation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub risk_free_annual: f64,
    pub drawdown_mode: DrawdownMode,
    /// Deducted once per round trip on the exit day; defaults to zero.
    pub cost_per_trade: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            risk_free_annual: DEFAULT_RISK_FREE_ANNUAL,
            drawdown_mode: DrawdownMode::Points,
            cost_per_trade: 0.0,
        }
    }
}

/// Performance summary for one spread, one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    /// Entry multiplier the rule used.
    pub c: f64,
    /// Day-over-day P&L, one entry per observation after the first.
    pub daily_returns: Vec<f64>,
    /// Annualized; absent when the return stream has zero variance.
    pub sharpe: Option<f64>,
    /// Compound annual growth at 252 days/year; absent when final equity
    /// is non-positive.
    pub cagr: Option<f64>,
    pub max_drawdown: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub n_long: usize,
    pub n_short: usize,
    /// Cumulative equity starting at 1.
    pub equity_curve: Vec<f64>,
    pub trades: Vec<Trade>,
}

/// Aggregates positions, spread moves, and the trade log into a report.
///
/// Daily return: `position_{t-1} * (s_t - s_{t-1})`, minus any per-trade cost
/// on exit days. Sharpe uses the sample standard deviation and a daily
/// risk-free rate of `risk_free_annual / 252`, annualized by sqrt(252); a
/// zero-variance return stream reports Sharpe as absent. Skewness and raw
/// (non-excess) kurtosis are the standardized third and fourth moments, both
/// defined as 0 for zero-variance streams.
pub fn compute_metrics(
    c: f64,
    positions: &[i8],
    spread: &SpreadSeries,
    mut trades: Vec<Trade>,
    config: &MetricsConfig,
) -> Result<BacktestReport> {
    let n = spread.len();
    if positions.len() != n {
        return Err(Error::Misaligned(format!(
            "{} positions vs {} spread observations",
            positions.len(),
            n
        )));
    }

    let s = &spread.values;
    let mut daily_returns: Vec<f64> = (1..n)
        .map(|t| f64::from(positions[t - 1]) * (s[t] - s[t - 1]))
        .collect();

    if config.cost_per_trade != 0.0 {
        for trade in &mut trades {
            trade.pnl -= config.cost_per_trade;
            let exit_index = spread
                .dates
                .binary_search(&trade.exit_date)
                .map_err(|_| Error::Misaligned("trade exit date not in spread".to_string()))?;
            if exit_index > 0 {
                daily_returns[exit_index - 1] -= config.cost_per_trade;
            }
        }
    }

    let mut equity_curve = Vec::with_capacity(n);
    let mut equity = 1.0f64;
    equity_curve.push(equity);
    for r in &daily_returns {
        equity += r;
        equity_curve.push(equity);
    }

    let n_returns = daily_returns.len();
    let (sharpe, skewness, kurtosis) = if n_returns >= 2 {
        let count = n_returns as f64;
        let mean = daily_returns.iter().sum::<f64>() / count;
        let m2 = daily_returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / count;
        if m2 > 0.0 {
            let m3 = daily_returns.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / count;
            let m4 = daily_returns.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / count;
            let sample_std = (m2 * count / (count - 1.0)).sqrt();
            let rf_daily = config.risk_free_annual / TRADING_DAYS_PER_YEAR;
            let sharpe = (mean - rf_daily) / sample_std * TRADING_DAYS_PER_YEAR.sqrt();
            (Some(sharpe), m3 / m2.powf(1.5), m4 / (m2 * m2))
        } else {
            (None, 0.0, 0.0)
        }
    } else {
        (None, 0.0, 0.0)
    };

    let final_equity = *equity_curve.last().expect("non-empty by construction");
    let cagr = if n_returns == 0 {
        Some(0.0)
    } else if final_equity > 0.0 {
        let years = n_returns as f64 / TRADING_DAYS_PER_YEAR;
        Some(final_equity.powf(1.0 / years) - 1.0)
    } else {
        None
    };

    let max_drawdown = match config.drawdown_mode {
        DrawdownMode::Points => max_drawdown_points(&equity_curve),
        DrawdownMode::Relative => max_drawdown_relative(&equity_curve),
    };

    let n_long = trades
        .iter()
        .filter(|t| t.direction == Direction::LongSpread)
        .count();
    let n_short = trades.len() - n_long;

    Ok(BacktestReport {
        c,
        daily_returns,
        sharpe,
        cagr,
        max_drawdown,
        skewness,
        kurtosis,
        n_long,
        n_short,
        equity_curve,
        trades,
    })
}

/// Runs the rule and computes metrics in one step.
pub fn run_backtest(
    spread: &SpreadSeries,
    rule: &TradingRule,
    config: &MetricsConfig,
) -> Result<BacktestReport> {
    let (trades, positions) = run_rule(spread, rule)?;
    compute_metrics(rule.c, &positions, spread, trades, config)
}

/// The default entry-multiplier search grid: 200 log-spaced points on
/// [0.01, 200].
pub fn default_c_grid() -> Vec<f64> {
    let (lo, hi, count) = (0.01f64, 200.0f64, 200usize);
    log_spaced_grid(lo, hi, count)
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 2, "invalid grid spec");
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Searches the candidate grid for the entry multiplier maximizing in-sample
/// Sharpe; ties (including between absent Sharpes) break to the smallest c.
///
/// Candidates are independent and evaluated concurrently under the
/// `parallel` feature. Errors with a no-trade diagnostic when every candidate
/// produces an empty trade log.
pub fn optimize_c(
    spread_train: &SpreadSeries,
    ou: &OuParams,
    candidate_grid: &[f64],
    config: &MetricsConfig,
) -> Result<(f64, BacktestReport)> {
    if candidate_grid.is_empty() {
        return Err(Error::InvalidConfig("empty candidate grid".to_string()));
    }
    for &c in candidate_grid {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "candidate c = {c} must be finite and non-negative"
            )));
        }
    }

    let reports = exec::map_slice(candidate_grid, |&c| {
        let rule = TradingRule::from_ou(c, ou);
        run_backtest(spread_train, &rule, config)
    });

    let mut best: Option<(f64, BacktestReport)> = None;
    let mut any_trades = false;
    for (&c, report) in candidate_grid.iter().zip(reports) {
        let report = report?;
        any_trades = any_trades || !report.trades.is_empty();
        let score = report.sharpe.unwrap_or(f64::NEG_INFINITY);
        let replace = match &best {
            None => true,
            Some((best_c, best_report)) => {
                let best_score = best_report.sharpe.unwrap_or(f64::NEG_INFINITY);
                score > best_score || (score == best_score && c < *best_c)
            }
        };
        if replace {
            best = Some((c, report));
        }
    }
    if !any_trades {
        return Err(Error::NoTrades);
    }
    Ok(best.expect("grid is non-empty"))
}

/// Backtests of the training and testing segments of one pair.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub train: BacktestReport,
    /// Absent when the testing segment is too short to produce a return.
    pub test: Option<BacktestReport>,
}

/// Builds both segment spreads with the training hedge ratio and runs the
/// rule with training-fitted parameters and the given `c` on each.
pub fn evaluate_pair(
    pair: &PairDataset,
    hedge_ratio: f64,
    ou: &OuParams,
    c: f64,
    config: &MetricsConfig,
) -> Result<PairEvaluation> {
    let full = build_spread(pair, hedge_ratio)?;
    let train = full.slice(0..pair.split_index);
    let test = full.slice(pair.split_index..full.len());
    let rule = TradingRule::from_ou(c, ou);
    let train_report = run_backtest(&train, &rule, config)?;
    let test_report = if test.len() >= 2 {
        Some(run_backtest(&test, &rule, config)?)
    } else {
        None
    };
    Ok(PairEvaluation {
        train: train_report,
        test: test_report,
    })
}
