//! Synthetic data generation: mean-reverting spreads, cointegrated price
//! pairs, and plain random walks.
//!
//! All draws come from counter-based ChaCha8 streams keyed by `(seed,
//! stream)`, so every artifact of one spec is reproducible bit for bit and
//! the transition, measurement, and price-walk noises never alias.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market_data::PriceSeries;
use crate::spread_model::{to_statespace, OuParams, SpreadSeries};

/// Log price that walks and simulated series start from.
pub const BASE_LOG_PRICE: f64 = 5.0;

const TRANSITION_STREAM: u64 = 0;
const MEASUREMENT_STREAM: u64 = 1;
const WALK_STREAM: u64 = 2;

/// Specification of one simulated spread or pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub ou: OuParams,
    /// Number of observations, at least 2.
    pub length: usize,
    pub seed: u64,
    /// Latent state at the first observation.
    pub initial_state: f64,
    /// Long-run price relation coefficient; the pair's hedge ratio is
    /// `-beta`. Must be non-zero for pair construction.
    pub beta: f64,
    /// Daily standard deviation of the common price walk, non-negative.
    pub walk_volatility: f64,
}

impl SimSpec {
    fn validate(&self) -> Result<()> {
        self.ou.validate()?;
        if self.length < 2 {
            return Err(Error::TooShort(format!(
                "simulation length {} below 2",
                self.length
            )));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "initial state {} is not finite",
                self.initial_state
            )));
        }
        if !(self.walk_volatility >= 0.0) || !self.walk_volatility.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "walk volatility {} must be finite and non-negative",
                self.walk_volatility
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::DegenerateSpec(format!(
                "beta {} is not finite",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Standard-normal generator: Box-Muller over one ChaCha8 stream, with the
/// paired draw cached so consecutive calls consume uniforms two at a time.
pub(crate) struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub(crate) fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub(crate) fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U keeps the radius argument in (0, 1], avoiding ln(0).
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }
}

/// Consecutive synthetic calendar dates used by all simulated series.
pub fn synthetic_dates(length: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid base date");
    (0..length)
        .map(|i| start + Duration::days(i as i64))
        .collect()
}

/// A simulated spread together with its latent path and raw noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct OuSimulation {
    /// Observed spread: latent state plus measurement noise.
    pub spread: SpreadSeries,
    /// Latent mean-reverting state, same length as the spread.
    pub latent: Vec<f64>,
    /// Standard-normal transition draws; entry `t` drives step `t -> t+1`,
    /// so there is one fewer than observations.
    pub transition_draws: Vec<f64>,
    /// Standard-normal measurement draws, one per observation.
    pub measurement_draws: Vec<f64>,
}

/// Simulates the latent recursion `zeta_t = X + Y zeta_(t-1) + Z eps_t` and
/// observations `s_t = zeta_t + V w_t`.
///
/// The raw draws are returned so tests can invert the recursion and confirm
/// the generator matches the model the filter assumes.
pub fn simulate_ou_spread(spec: &SimSpec) -> Result<OuSimulation> {
    spec.validate()?;
    let ss = to_statespace(&spec.ou)?;
    let n = spec.length;

    let mut transition = GaussianStream::new(spec.seed, TRANSITION_STREAM);
    let mut measurement = GaussianStream::new(spec.seed, MEASUREMENT_STREAM);

    let mut latent = Vec::with_capacity(n);
    let mut transition_draws = Vec::with_capacity(n - 1);
    latent.push(spec.initial_state);
    for _ in 1..n {
        let eps = transition.next_normal();
        let prev = *latent.last().expect("non-empty");
        latent.push(ss.x + ss.y * prev + ss.z * eps);
        transition_draws.push(eps);
    }

    let mut measurement_draws = Vec::with_capacity(n);
    let values = latent
        .iter()
        .map(|&state| {
            let w = measurement.next_normal();
            measurement_draws.push(w);
            state + ss.v * w
        })
        .collect();

    Ok(OuSimulation {
        spread: SpreadSeries {
            dates: synthetic_dates(n),
            values,
        },
        latent,
        transition_draws,
        measurement_draws,
    })
}

/// Simulates a cointegrated pair: `log P_a` follows a random walk `m_t` and
/// `log P_b = (m_t - zeta_t) / beta`, so `log P_a - beta log P_b` recovers
/// the latent spread and the pair's true hedge ratio is `-beta`.
pub fn simulate_cointegrated_pair(spec: &SimSpec) -> Result<(PriceSeries, PriceSeries)> {
    spec.validate()?;
    if spec.beta == 0.0 {
        return Err(Error::DegenerateSpec(
            "beta = 0 leaves the second price undefined".to_string(),
        ));
    }
    let sim = simulate_ou_spread(spec)?;
    let n = spec.length;

    let mut walk = GaussianStream::new(spec.seed, WALK_STREAM);
    let mut log_a = Vec::with_capacity(n);
    let mut level = BASE_LOG_PRICE;
    log_a.push(level);
    for _ in 1..n {
        level += spec.walk_volatility * walk.next_normal();
        log_a.push(level);
    }

    let log_b: Vec<f64> = log_a
        .iter()
        .zip(&sim.latent)
        .map(|(&m, &zeta)| (m - zeta) / spec.beta)
        .collect();

    let dates = synthetic_dates(n);
    let series_a = PriceSeries::new("sim_a", dates.clone(), log_a)?;
    let series_b = PriceSeries::new("sim_b", dates, log_b)?;
    Ok((series_a, series_b))
}

/// Simulates an independent driftless log-price random walk.
pub fn simulate_random_walk(
    commodity_id: &str,
    length: usize,
    seed: u64,
    volatility: f64,
) -> Result<PriceSeries> {
    if length < 2 {
        return Err(Error::TooShort(format!(
            "walk length {length} below 2"
        )));
    }
    if !(volatility >= 0.0) || !volatility.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "walk volatility {volatility} must be finite and non-negative"
        )));
    }
    let mut walk = GaussianStream::new(seed, WALK_STREAM);
    let mut log_prices = Vec::with_capacity(length);
    let mut level = BASE_LOG_PRICE;
    log_prices.push(level);
    for _ in 1..length {
        level += volatility * walk.next_normal();
        log_prices.push(level);
    }
    PriceSeries::new(commodity_id, synthetic_dates(length), log_prices)
}
