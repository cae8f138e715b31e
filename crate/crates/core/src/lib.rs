//! Pairs-trading research toolkit for commodity futures.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`market_data`] loads daily price CSVs, interpolates interior gaps,
//!    and aligns pairs on a shared calendar; [`cointegration`] scans all
//!    ordered pairs with a two-variable trace test and reports hedge ratios.
//! 2. [`spread_model`] defines the mean-reverting latent spread model and
//!    its exact Kalman filter/smoother; [`estimation`] fits it by maximum
//!    likelihood with differential evolution.
//! 3. [`backtest`] runs a threshold entry/exit rule on the spread, computes
//!    performance metrics, and searches the entry multiplier; [`simulate`]
//!    generates synthetic spreads and cointegrated pairs for calibration
//!    studies.
//!
//! Pair scans, fitness evaluation inside the optimizer, and the entry-grid
//! search fan out across a rayon pool when the default `parallel` feature is
//! on; disabling it yields a dependency-free sequential build with bitwise
//! identical results.

// Validation code negates comparisons (`!(x >= 0.0)`) instead of flipping
// them (`x < 0.0`) so that NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cointegration;
pub mod error;
mod exec;
pub mod estimation;
pub mod market_data;
pub mod simulate;
pub mod spread_model;

pub use error::{Error, Result};
