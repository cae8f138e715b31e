//! The latent spread model: an AR(1) state with Gaussian measurement noise.
//!
//! The observed spread is `s_t = zeta_t + V w_t`, where the latent level
//! follows `zeta_t = X + Y zeta_{t-1} + Z eps_t`. At unit time step this is
//! the discretization of an Ornstein-Uhlenbeck process with reversion speed
//! `kappa`, long-run level `mu`, and noise scale `sigma` under the mapping
//!
//! ```text
//! X = kappa * mu      kappa = 1 - Y
//! Y = 1 - kappa       mu    = X / kappa
//! Z = sigma           sigma = Z
//! ```
//!
//! The scalar Kalman filter below evaluates the exact Gaussian log-likelihood
//! of a spread under given parameters and produces filtered and smoothed
//! state estimates.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::PairDataset;

/// Continuous-parameter description of the mean-reverting spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Mean-reversion speed per day, in (0, 1).
    pub kappa: f64,
    /// Long-run spread level.
    pub mu: f64,
    /// Process noise scale per day, non-negative.
    pub sigma: f64,
    /// Measurement noise scale, non-negative.
    pub v: f64,
}

impl OuParams {
    /// Builds and validates the parameter set.
    pub fn new(kappa: f64, mu: f64, sigma: f64, v: f64) -> Result<Self> {
        let p = Self {
            kappa,
            mu,
            sigma,
            v,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the documented ranges: `kappa` in (0, 1), `sigma >= 0`, `v >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::ConstraintViolation(format!(
                "kappa {} outside (0, 1)",
                self.kappa
            )));
        }
        if !(self.sigma >= 0.0) || !(self.v >= 0.0) || !self.mu.is_finite() {
            return Err(Error::ConstraintViolation(format!(
                "sigma {} and v {} must be non-negative, mu {} finite",
                self.sigma, self.v, self.mu
            )));
        }
        Ok(())
    }
}

/// Transition/measurement form of the same model, the space the optimizer
/// searches in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceParams {
    /// Transition intercept, non-negative.
    pub x: f64,
    /// Transition slope, strictly inside (0, 1).
    pub y: f64,
    /// Transition noise scale, non-negative.
    pub z: f64,
    /// Measurement noise scale, non-negative.
    pub v: f64,
}

impl StateSpaceParams {
    /// Builds and validates the parameter set.
    pub fn new(x: f64, y: f64, z: f64, v: f64) -> Result<Self> {
        let p = Self { x, y, z, v };
        p.validate()?;
        Ok(p)
    }

    /// Checks `x >= 0`, `0 < y < 1`, `z >= 0`, `v >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.x >= 0.0) {
            return Err(Error::ConstraintViolation(format!(
                "x {} must be non-negative",
                self.x
            )));
        }
        if !(self.y > 0.0 && self.y < 1.0) {
            return Err(Error::ConstraintViolation(format!(
                "y {} outside (0, 1)",
                self.y
            )));
        }
        if !(self.z >= 0.0) || !(self.v >= 0.0) {
            return Err(Error::ConstraintViolation(format!(
                "z {} and v {} must be non-negative",
                self.z, self.v
            )));
        }
        Ok(())
    }
}

/// Maps continuous parameters to transition/measurement form.
///
/// Errors when the result would leave the searchable region, e.g. `mu < 0`
/// makes the intercept negative.
pub fn to_statespace(p: &OuParams) -> Result<StateSpaceParams> {
    p.validate()?;
    StateSpaceParams::new(p.kappa * p.mu, 1.0 - p.kappa, p.sigma, p.v)
}

/// Inverts [`to_statespace`]: `kappa = 1 - y`, `mu = x / kappa`, `sigma = z`.
pub fn from_statespace(p: &StateSpaceParams) -> Result<OuParams> {
    p.validate()?;
    let kappa = 1.0 - p.y;
    OuParams::new(kappa, p.x / kappa, p.z, p.v)
}

/// A spread observation series on a trading calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl SpreadSeries {
    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series holds no observations.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copies out the sub-series over `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SpreadSeries {
        SpreadSeries {
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }
}

/// Builds the spread `log P_a + hedge_ratio * log P_b` over the whole pair.
pub fn build_spread(pair: &PairDataset, hedge_ratio: f64) -> Result<SpreadSeries> {
    if !hedge_ratio.is_finite() {
        return Err(Error::ConstraintViolation(format!(
            "hedge ratio {hedge_ratio} is not finite"
        )));
    }
    let values = pair
        .series_a
        .log_prices
        .iter()
        .zip(&pair.series_b.log_prices)
        .map(|(a, b)| a + hedge_ratio * b)
        .collect();
    Ok(SpreadSeries {
        dates: pair.series_a.dates.clone(),
        values,
    })
}

/// Filter and smoother output, one entry per observation.
#[derive(Debug, Clone)]
pub struct KalmanOutput {
    pub filtered_means: Vec<f64>,
    pub filtered_variances: Vec<f64>,
    pub smoothed_means: Vec<f64>,
    pub smoothed_variances: Vec<f64>,
    /// Exact Gaussian log-likelihood of the observations.
    pub log_likelihood: f64,
}

/// When `y` is this close to 1 the stationary variance formula blows up and
/// initialization falls back to a data-driven scale.
const STATIONARY_Y_TOLERANCE: f64 = 1e-6;

/// Floor below which a predictive variance is treated as degenerate.
const PREDICTIVE_VARIANCE_FLOOR: f64 = 1e-300;

/// Runs the scalar Kalman filter and fixed-interval smoother over a spread.
///
/// Initialization: state mean starts at the first observation; state variance
/// starts at the stationary value `z^2 / (1 - y^2)`, or 10x the sample
/// variance of the spread when `y` is within 1e-6 of 1. Requires at least two
/// observations and `z`, `v` not both zero.
pub fn kalman_filter(spread: &SpreadSeries, params: &StateSpaceParams) -> Result<KalmanOutput> {
    params.validate()?;
    let s = &spread.values;
    let n = s.len();
    if n < 2 {
        return Err(Error::TooShort(format!(
            "spread has {n} observations; the filter needs at least 2"
        )));
    }
    if params.z == 0.0 && params.v == 0.0 {
        return Err(Error::ConstraintViolation(
            "z and v cannot both be zero".to_string(),
        ));
    }

    let (x, y, z, v) = (params.x, params.y, params.z, params.v);
    let z2 = z * z;
    let v2 = v * v;

    let init_var = if 1.0 - y < STATIONARY_Y_TOLERANCE {
        10.0 * sample_variance(s)
    } else {
        z2 / (1.0 - y * y)
    };

    let mut filtered_means = Vec::with_capacity(n);
    let mut filtered_variances = Vec::with_capacity(n);
    let mut predicted_means = Vec::with_capacity(n);
    let mut predicted_variances = Vec::with_capacity(n);
    let mut log_likelihood = 0.0;

    let mut mean = s[0];
    let mut var = init_var;
    const LN_2PI: f64 = 1.837877066409345483560659472811;

    for (t, &observation) in s.iter().enumerate() {
        let (pred_mean, pred_var) = if t == 0 {
            (mean, var)
        } else {
            (x + y * mean, y * y * var + z2)
        };
        predicted_means.push(pred_mean);
        predicted_variances.push(pred_var);

        let f = pred_var + v2;
        if !f.is_finite() || f < PREDICTIVE_VARIANCE_FLOOR {
            return Err(Error::NumericalDegeneracy(format!(
                "predictive variance {f} at step {t}"
            )));
        }
        let innovation = observation - pred_mean;
        log_likelihood -= 0.5 * (LN_2PI + f.ln() + innovation * innovation / f);

        let gain = pred_var / f;
        mean = pred_mean + gain * innovation;
        var = pred_var * (1.0 - gain);
        filtered_means.push(mean);
        filtered_variances.push(var);
    }

    // Fixed-interval smoother, backwards. When the predicted variance is
    // zero the state was deterministic and the smoothing gain is zero.
    let mut smoothed_means = filtered_means.clone();
    let mut smoothed_variances = filtered_variances.clone();
    for t in (0..n - 1).rev() {
        let pred_var = predicted_variances[t + 1];
        let gain = if pred_var > 0.0 {
            filtered_variances[t] * y / pred_var
        } else {
            0.0
        };
        smoothed_means[t] =
            filtered_means[t] + gain * (smoothed_means[t + 1] - predicted_means[t + 1]);
        smoothed_variances[t] =
            filtered_variances[t] + gain * gain * (smoothed_variances[t + 1] - pred_var);
    }

    Ok(KalmanOutput {
        filtered_means,
        filtered_variances,
        smoothed_means,
        smoothed_variances,
        log_likelihood,
    })
}

/// Half-life of a deviation, under both common conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanReversionTime {
    /// Days for an expected deviation to halve: `ln(2) / kappa`.
    pub half_life: f64,
    /// Days for an expected deviation to shrink by a factor e: `1 / kappa`.
    pub e_folding: f64,
}

/// Computes both reversion time scales from `kappa > 0`.
pub fn half_life(kappa: f64) -> Result<MeanReversionTime> {
    if !(kappa > 0.0) {
        return Err(Error::ConstraintViolation(format!(
            "kappa {kappa} must be positive"
        )));
    }
    Ok(MeanReversionTime {
        half_life: std::f64::consts::LN_2 / kappa,
        e_folding: 1.0 / kappa,
    })
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::Duration;

    fn series(values: Vec<f64>) -> SpreadSeries {
        let start = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap();
        SpreadSeries {
            dates: (0..values.len())
                .map(|i| start + Duration::days(i as i64))
                .collect(),
            values,
        }
    }

    #[test]
    fn mapping_matches_closed_form() {
        let p = OuParams::new(0.5, 1.0, 0.2, 0.1).unwrap();
        let ss = to_statespace(&p).unwrap();
        assert_eq!(ss.x, 0.5);
        assert_eq!(ss.y, 0.5);
        assert_eq!(ss.z, 0.2);
        assert_eq!(ss.v, 0.1);
    }

    #[test]
    fn inverse_mapping_matches_closed_form() {
        let ss = StateSpaceParams::new(0.5, 0.5, 0.2, 0.1).unwrap();
        let p = from_statespace(&ss).unwrap();
        assert_abs_diff_eq!(p.kappa, 0.5);
        assert_abs_diff_eq!(p.mu, 1.0);
        assert_abs_diff_eq!(p.sigma, 0.2);
    }

    #[test]
    fn mapping_rejects_negative_long_run_level() {
        let p = OuParams::new(0.5, -1.0, 0.2, 0.1).unwrap();
        assert!(matches!(
            to_statespace(&p),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn kappa_at_or_above_one_is_rejected() {
        assert!(OuParams::new(1.0, 1.0, 0.2, 0.1).is_err());
        assert!(OuParams::new(1.5, 1.0, 0.2, 0.1).is_err());
    }

    #[test]
    fn spread_combines_logs_with_hedge_ratio() {
        use crate::market_data::{PairDataset, PriceSeries};
        let start = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap();
        let dates: Vec<NaiveDate> = (0..2).map(|i| start + Duration::days(i)).collect();
        let a = PriceSeries::new("a", dates.clone(), vec![4.60517, 4.7]).unwrap();
        let b = PriceSeries::new("b", dates, vec![5.0, 5.1]).unwrap();
        let pair = PairDataset::new(a, b, 1).unwrap();
        let spread = build_spread(&pair, -0.482).unwrap();
        assert_abs_diff_eq!(spread.values[0], 2.19517, epsilon = 1e-12);
    }

    #[test]
    fn zero_measurement_noise_tracks_observations_exactly() {
        let spread = series(vec![1.0, 1.4, 0.8, 1.1, 0.9]);
        let params = StateSpaceParams::new(0.2, 0.8, 0.1, 0.0).unwrap();
        let out = kalman_filter(&spread, &params).unwrap();
        for (m, s) in out.filtered_means.iter().zip(&spread.values) {
            assert_abs_diff_eq!(m, s, epsilon = 1e-12);
        }
        for (m, s) in out.smoothed_means.iter().zip(&spread.values) {
            assert_abs_diff_eq!(m, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothed_variance_never_exceeds_filtered() {
        let spread = series(vec![0.9, 1.2, 1.0, 1.3, 0.7, 1.05, 1.0, 0.95]);
        let params = StateSpaceParams::new(0.1, 0.9, 0.05, 0.03).unwrap();
        let out = kalman_filter(&spread, &params).unwrap();
        for (sv, fv) in out
            .smoothed_variances
            .iter()
            .zip(&out.filtered_variances)
        {
            assert!(*sv <= fv + 1e-12, "smoothed {sv} > filtered {fv}");
        }
    }

    #[test]
    fn filtered_variance_converges_monotonically_to_steady_state() {
        let spread = series(vec![1.0; 60].iter().enumerate()
            .map(|(i, _)| 1.0 + 0.1 * ((i as f64) * 0.7).sin())
            .collect());
        let params = StateSpaceParams::new(0.1, 0.9, 0.05, 0.04).unwrap();
        let out = kalman_filter(&spread, &params).unwrap();
        let vars = &out.filtered_variances;
        let mut deltas: Vec<f64> = vars.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        // After a short transient the step sizes shrink monotonically.
        deltas.drain(0..3);
        for w in deltas.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(*deltas.last().unwrap() < 1e-12);
    }

    #[test]
    fn both_noise_scales_zero_is_rejected() {
        let spread = series(vec![1.0, 1.1, 0.9]);
        let params = StateSpaceParams {
            x: 0.1,
            y: 0.9,
            z: 0.0,
            v: 0.0,
        };
        assert!(matches!(
            kalman_filter(&spread, &params),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn single_observation_is_rejected() {
        let spread = series(vec![1.0]);
        let params = StateSpaceParams::new(0.1, 0.9, 0.05, 0.02).unwrap();
        assert!(matches!(
            kalman_filter(&spread, &params),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn near_unit_slope_uses_data_driven_initialization() {
        // y within 1e-6 of 1: stationary variance would explode, so the
        // filter must still return finite output.
        let spread = series(vec![1.0, 1.2, 0.8, 1.1, 0.95, 1.05]);
        let params = StateSpaceParams {
            x: 1e-8,
            y: 1.0 - 1e-9,
            z: 0.05,
            v: 0.02,
        };
        let out = kalman_filter(&spread, &params).unwrap();
        assert!(out.log_likelihood.is_finite());
        assert!(out.filtered_variances.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn half_life_follows_both_conventions() {
        let t = half_life(0.0693).unwrap();
        assert_abs_diff_eq!(t.half_life, 10.0, epsilon = 0.01);
        assert_abs_diff_eq!(t.e_folding, 1.0 / 0.0693, epsilon = 1e-12);
        assert!(half_life(0.0).is_err());
    }
}
