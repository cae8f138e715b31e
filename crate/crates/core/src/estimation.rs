//! Maximum-likelihood fitting of the spread model by differential evolution.
//!
//! The objective is the Kalman-filter log-likelihood as a function of the
//! transition/measurement parameters (X, Y, Z, V), maximized with classic
//! DE/rand/1/bin inside a bounded box. Candidate construction and evaluation
//! for each (generation, member) slot draw from their own ChaCha8 stream, so
//! results are bit-identical whether members are evaluated in parallel or
//! sequentially.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::spread_model::{
    from_statespace, kalman_filter, OuParams, SpreadSeries, StateSpaceParams,
};

/// Fitness surrogate for candidates whose objective evaluation failed
/// numerically; large and negative so selection discards them.
pub const FAILED_FITNESS: f64 = -1e300;

/// Generations without sufficient best-fitness improvement before the run is
/// declared converged.
const STALL_WINDOW: usize = 20;

/// Members are addressed inside a generation's stream id with this shift, so
/// population sizes must stay below 2^20.
const MEMBER_STREAM_BITS: u32 = 20;

/// Differential-evolution settings.
///
/// Defaults follow the canonical DE literature values: F = 0.8, CR = 0.9,
/// population 40, at most 500 generations, and a 1e-8 stall tolerance. The
/// default bounds box is the spread-model search region: X in [0, 1], Y in
/// [1e-6, 1 - 1e-6], Z in [1e-8, 1], V in [0, 1].
#[derive(Debug, Clone)]
pub struct DeConfig {
    /// Population size; at least 8 is recommended, below 4 is rejected
    /// (rand/1 mutation needs four distinct members).
    pub population_size: usize,
    /// Hard cap on evolution generations, at least 1.
    pub max_generations: usize,
    /// Mutation factor F, in (0, 2].
    pub differential_weight: f64,
    /// Crossover rate CR, in [0, 1].
    pub crossover_rate: f64,
    /// PRNG seed; equal seeds reproduce runs bit-for-bit.
    pub seed: u64,
    /// Closed per-parameter search intervals.
    pub bounds: Vec<(f64, f64)>,
    /// Minimum best-fitness improvement that resets the stall counter.
    pub tolerance: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            max_generations: 500,
            differential_weight: 0.8,
            crossover_rate: 0.9,
            seed: 0,
            bounds: vec![(0.0, 1.0), (1e-6, 1.0 - 1e-6), (1e-8, 1.0), (0.0, 1.0)],
            tolerance: 1e-8,
        }
    }
}

impl DeConfig {
    /// Validates every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidConfig(format!(
                "population size {} below 4; rand/1 needs four distinct members",
                self.population_size
            )));
        }
        if self.population_size >= 1 << MEMBER_STREAM_BITS {
            return Err(Error::InvalidConfig(format!(
                "population size {} exceeds the stream addressing limit",
                self.population_size
            )));
        }
        if self.max_generations == 0 {
            return Err(Error::InvalidConfig(
                "max generations must be at least 1".to_string(),
            ));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "differential weight {} outside (0, 2]",
                self.differential_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::InvalidConfig(format!(
                "crossover rate {} outside [0, 1]",
                self.crossover_rate
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} must be non-negative",
                self.tolerance
            )));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidConfig("empty bounds".to_string()));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "bounds[{i}] = [{lo}, {hi}] is not a finite interval"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the bounds box stays inside the spread-model constraint
    /// region: X >= 0, Y strictly inside (0, 1), Z >= 0, V >= 0.
    fn validate_spread_bounds(&self) -> Result<()> {
        if self.bounds.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "spread fitting needs 4 parameter bounds, got {}",
                self.bounds.len()
            )));
        }
        let (x, y, z, v) = (self.bounds[0], self.bounds[1], self.bounds[2], self.bounds[3]);
        if x.0 < 0.0 || z.0 < 0.0 || v.0 < 0.0 {
            return Err(Error::InvalidConfig(
                "X, Z, V bounds must be non-negative".to_string(),
            ));
        }
        if !(y.0 > 0.0 && y.1 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Y bounds [{}, {}] must lie strictly inside (0, 1)",
                y.0, y.1
            )));
        }
        Ok(())
    }
}

/// Outcome of a [`de_optimize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub best: Vec<f64>,
    pub fitness: f64,
    pub generations_run: usize,
    pub converged: bool,
    /// Best-so-far fitness after initialization and after each generation.
    pub fitness_history: Vec<f64>,
}

/// Spread-model fit: the optimizer's best point in both parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best_params: StateSpaceParams,
    pub ou_params: OuParams,
    /// Log-likelihood of `best_params`, re-evaluated independently of the
    /// optimizer's bookkeeping.
    pub log_likelihood: f64,
    pub generations_run: usize,
    pub converged: bool,
    pub fitness_history: Vec<f64>,
}

/// Reflects `value` into the closed interval `[lo, hi]`.
///
/// Closed-form triangle fold; equivalent to repeatedly mirroring at whichever
/// boundary is exceeded.
fn reflect_into(value: f64, lo: f64, hi: f64) -> f64 {
    if value >= lo && value <= hi {
        return value;
    }
    let width = hi - lo;
    if width == 0.0 {
        return lo;
    }
    let period = 2.0 * width;
    let mut offset = (value - lo) % period;
    if offset < 0.0 {
        offset += period;
    }
    let folded = offset.min(period - offset);
    lo + folded
}

/// PRNG stream for one (generation, member) slot. Generation 0 is the
/// initialization pass.
fn member_rng(seed: u64, generation: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << MEMBER_STREAM_BITS) | member as u64);
    rng
}

/// Maximizes `objective` over the config's bounds box with DE/rand/1/bin.
///
/// The objective must be total on the box, returning a large negative fitness
/// (for instance [`FAILED_FITNESS`]) instead of failing; NaN results are
/// treated as negative infinity defensively. The run stops at
/// `max_generations` or once the best fitness improves by less than
/// `tolerance` for 20 consecutive generations. Identical config and seed give
/// bit-identical outcomes regardless of thread count.
pub fn de_optimize<F>(objective: F, config: &DeConfig) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    config.validate()?;
    let pop = config.population_size;
    let dim = config.bounds.len();
    let f_weight = config.differential_weight;
    let cr = config.crossover_rate;

    let sanitize = |fit: f64| if fit.is_nan() { f64::NEG_INFINITY } else { fit };

    let mut population: Vec<Vec<f64>> = Vec::with_capacity(pop);
    let init: Vec<(Vec<f64>, f64)> = exec::map_range(pop, |i| {
        let mut rng = member_rng(config.seed, 0, i);
        let member: Vec<f64> = config
            .bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect();
        let fit = sanitize(objective(&member));
        (member, fit)
    });
    let mut fitness: Vec<f64> = Vec::with_capacity(pop);
    for (member, fit) in init {
        population.push(member);
        fitness.push(fit);
    }

    let best_index = |fitness: &[f64]| {
        let mut idx = 0;
        for (i, f) in fitness.iter().enumerate() {
            if *f > fitness[idx] {
                idx = i;
            }
        }
        idx
    };

    let mut best = best_index(&fitness);
    let mut best_fitness = fitness[best];
    let mut best_vector = population[best].clone();
    let mut fitness_history = vec![best_fitness];

    let mut stall = 0usize;
    let mut generations_run = 0usize;
    let mut converged = false;

    for generation in 1..=config.max_generations {
        let trials: Vec<(Vec<f64>, f64)> = {
            let population = &population;
            exec::map_range(pop, |i| {
                let mut rng = member_rng(config.seed, generation as u64, i);
                let mut pick_distinct = |exclude: &[usize]| loop {
                    let r = rng.gen_range(0..pop);
                    if !exclude.contains(&r) {
                        return r;
                    }
                };
                let r1 = pick_distinct(&[i]);
                let r2 = pick_distinct(&[i, r1]);
                let r3 = pick_distinct(&[i, r1, r2]);
                let j_rand = rng.gen_range(0..dim);
                let mut trial = population[i].clone();
                for j in 0..dim {
                    let crossed = rng.gen::<f64>() < cr;
                    if crossed || j == j_rand {
                        let (lo, hi) = config.bounds[j];
                        let mutant =
                            population[r1][j] + f_weight * (population[r2][j] - population[r3][j]);
                        trial[j] = reflect_into(mutant, lo, hi);
                    }
                }
                let fit = sanitize(objective(&trial));
                (trial, fit)
            })
        };

        for (i, (trial, fit)) in trials.into_iter().enumerate() {
            if fit >= fitness[i] {
                population[i] = trial;
                fitness[i] = fit;
            }
        }

        best = best_index(&fitness);
        let improvement = fitness[best] - best_fitness;
        if fitness[best] > best_fitness {
            best_fitness = fitness[best];
            best_vector = population[best].clone();
        }
        fitness_history.push(best_fitness);
        generations_run = generation;

        if improvement < config.tolerance {
            stall += 1;
            if stall >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(DeOutcome {
        best: best_vector,
        fitness: best_fitness,
        generations_run,
        converged,
        fitness_history,
    })
}

/// Fits the spread model to `spread` by maximizing the Kalman log-likelihood
/// over (X, Y, Z, V).
///
/// Requires at least 30 observations; below that the 4-parameter likelihood
/// is chronically flat. Candidates whose likelihood evaluation fails score
/// [`FAILED_FITNESS`]; if no candidate ever evaluates cleanly the fit errors.
/// A constant spread does not error: it drives Z and V to their lower bounds
/// and the likelihood diverges upward, which callers can detect from the
/// bound-hugging parameters.
pub fn fit_spread_model(spread: &SpreadSeries, config: &DeConfig) -> Result<FitResult> {
    config.validate()?;
    config.validate_spread_bounds()?;
    if spread.len() < 30 {
        return Err(Error::TooShort(format!(
            "spread has {} observations; fitting needs at least 30",
            spread.len()
        )));
    }

    let objective = |vector: &[f64]| -> f64 {
        let params = StateSpaceParams {
            x: vector[0],
            y: vector[1],
            z: vector[2],
            v: vector[3],
        };
        match kalman_filter(spread, &params) {
            Ok(out) if out.log_likelihood.is_finite() => out.log_likelihood,
            _ => FAILED_FITNESS,
        }
    };

    let outcome = de_optimize(objective, config)?;
    if outcome.fitness <= FAILED_FITNESS {
        return Err(Error::EstimationFailed(
            "every candidate likelihood evaluation failed".to_string(),
        ));
    }

    let best_params = StateSpaceParams::new(
        outcome.best[0],
        outcome.best[1],
        outcome.best[2],
        outcome.best[3],
    )?;
    let ou_params = from_statespace(&best_params)?;
    let log_likelihood = kalman_filter(spread, &best_params)?.log_likelihood;

    Ok(FitResult {
        best_params,
        ou_params,
        log_likelihood,
        generations_run: outcome.generations_run,
        converged: outcome.converged,
        fitness_history: outcome.fitness_history,
    })
}
