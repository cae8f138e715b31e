//! Property tests for the trading rule, drawdown computation, and metrics.

use chrono::{Duration, NaiveDate};
use pairlab_core::backtest::{
    compute_metrics, max_drawdown_points, max_drawdown_relative, run_rule, Direction,
    MetricsConfig, TradingRule, DEFAULT_EXIT_EPSILON,
};
use pairlab_core::spread_model::SpreadSeries;
use proptest::prelude::*;

fn spread_of(values: Vec<f64>) -> SpreadSeries {
    let start = NaiveDate::from_ymd_opt(2013, 4, 1).unwrap();
    SpreadSeries {
        dates: (0..values.len())
            .map(|i| start + Duration::days(i as i64))
            .collect(),
        values,
    }
}

/// Band half-width equal to c, centered on mu.
fn rule_with(c: f64, mu: f64) -> TradingRule {
    TradingRule {
        c,
        exit_epsilon: DEFAULT_EXIT_EPSILON,
        mu,
        kappa: 0.5,
        sigma: 1.0,
    }
}

fn brute_force_drawdown_points(equity: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..equity.len() {
        let peak = equity[..=t].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.min(equity[t] - peak);
    }
    worst
}

fn brute_force_drawdown_relative(equity: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..equity.len() {
        let peak = equity[..=t].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.min((equity[t] - peak) / peak);
    }
    worst
}

proptest! {
    #[test]
    fn streaming_drawdown_equals_brute_force(
        equity in prop::collection::vec(0.1f64..3.0, 1..200)
    ) {
        prop_assert_eq!(max_drawdown_points(&equity), brute_force_drawdown_points(&equity));
        prop_assert_eq!(max_drawdown_relative(&equity), brute_force_drawdown_relative(&equity));
        prop_assert!(max_drawdown_points(&equity) <= 0.0);
        prop_assert!(max_drawdown_relative(&equity) <= 0.0);
    }

    #[test]
    fn rule_invariants_hold_on_arbitrary_paths(
        values in prop::collection::vec(-1.5f64..1.5, 2..120),
        c in 0.05f64..2.5,
        mu in -0.4f64..0.4,
    ) {
        let spread = spread_of(values.clone());
        let rule = rule_with(c, mu);
        let (trades, positions) = run_rule(&spread, &rule).unwrap();
        let n = values.len();
        let band = rule.band_half_width();

        // Positions are in {-1, 0, 1}, never reverse in one step, and the
        // final day is always flat.
        prop_assert!(positions.iter().all(|p| [-1i8, 0, 1].contains(p)));
        for w in positions.windows(2) {
            prop_assert!((i16::from(w[1]) - i16::from(w[0])).abs() <= 1);
        }
        prop_assert_eq!(positions[n - 1], 0);

        let mut previous_exit: Option<NaiveDate> = None;
        for trade in &trades {
            prop_assert!(trade.exit_date > trade.entry_date);
            if let Some(prev) = previous_exit {
                // Exits are checked before entries, so re-entry waits a day.
                prop_assert!(trade.entry_date > prev);
            }
            previous_exit = Some(trade.exit_date);

            let entry = spread.dates.binary_search(&trade.entry_date).unwrap();
            let exit = spread.dates.binary_search(&trade.exit_date).unwrap();
            prop_assert_eq!(spread.values[entry], trade.entry_spread);
            prop_assert_eq!(spread.values[exit], trade.exit_spread);

            match trade.direction {
                Direction::ShortSpread => {
                    prop_assert!(trade.entry_spread >= mu + band - 1e-12);
                    prop_assert_eq!(trade.pnl, trade.entry_spread - trade.exit_spread);
                    let crossed =
                        trade.exit_spread <= mu + rule.exit_epsilon * trade.exit_spread + 1e-12;
                    prop_assert!(crossed || exit == n - 1);
                }
                Direction::LongSpread => {
                    prop_assert!(trade.entry_spread <= mu - band + 1e-12);
                    prop_assert_eq!(trade.pnl, trade.exit_spread - trade.entry_spread);
                    let crossed =
                        trade.exit_spread >= mu - rule.exit_epsilon * trade.exit_spread - 1e-12;
                    prop_assert!(crossed || exit == n - 1);
                }
            }
        }

        // Trade P&L telescopes to the equity change.
        let report =
            compute_metrics(c, &positions, &spread, trades, &MetricsConfig::default()).unwrap();
        let pnl_sum: f64 = report.trades.iter().map(|t| t.pnl).sum();
        let delta = report.equity_curve.last().unwrap() - report.equity_curve[0];
        prop_assert!((pnl_sum - delta).abs() <= 1e-9);
        prop_assert!(report.max_drawdown <= 0.0);
        prop_assert_eq!(report.equity_curve[0], 1.0);
        prop_assert_eq!(report.equity_curve.len(), n);
        prop_assert_eq!(report.daily_returns.len(), n - 1);
        if report.sharpe.is_some() {
            // Raw kurtosis is at least 1 whenever the variance is positive.
            prop_assert!(report.kurtosis >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn trade_count_never_increases_with_wider_bands(
        values in prop::collection::vec(-2.0f64..2.0, 2..150),
        c1 in 0.05f64..1.5,
        widen in 1.01f64..4.0,
    ) {
        let spread = spread_of(values);
        let c2 = c1 * widen;
        let (narrow, _) = run_rule(&spread, &rule_with(c1, 0.0)).unwrap();
        let (wide, _) = run_rule(&spread, &rule_with(c2, 0.0)).unwrap();
        prop_assert!(
            narrow.len() >= wide.len(),
            "c1={} got {} trades, c2={} got {}",
            c1, narrow.len(), c2, wide.len()
        );
    }
}
