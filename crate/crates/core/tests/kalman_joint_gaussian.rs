//! Cross-checks the recursive filter/smoother against a dense joint-Gaussian
//! reference computed independently with matrix algebra.
//!
//! The observation vector of the linear state-space model is jointly
//! Gaussian, so its exact log-density and the exact conditional moments of
//! the latent path are available in closed form through an O(T^3)
//! construction. Any disagreement with the O(T) recursion indicates a bug in
//! one of the two routes.

use approx::assert_abs_diff_eq;
use chrono::{Duration, NaiveDate};
use nalgebra::{Cholesky, DMatrix, DVector};
use pairlab_core::spread_model::{kalman_filter, SpreadSeries, StateSpaceParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837877066409345483560659472811;

fn spread_of(values: Vec<f64>) -> SpreadSeries {
    let start = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap();
    SpreadSeries {
        dates: (0..values.len())
            .map(|i| start + Duration::days(i as i64))
            .collect(),
        values,
    }
}

/// Exact log-likelihood plus conditional latent means/variances given all
/// observations, built from the implied joint covariance.
///
/// Mirrors the filter's initialization: prior mean is the first observation,
/// prior variance the stationary value (callers keep y away from 1).
fn dense_reference(s: &[f64], p: &StateSpaceParams) -> (f64, Vec<f64>, Vec<f64>) {
    let n = s.len();
    let init_var = p.z * p.z / (1.0 - p.y * p.y);

    let mut mu = vec![0.0; n];
    mu[0] = s[0];
    for t in 1..n {
        mu[t] = p.x + p.y * mu[t - 1];
    }

    // Latent covariance: C(t,t) follows the variance recursion and
    // C(t,u) = y^(t-u) C(u,u) for t > u.
    let mut c = DMatrix::zeros(n, n);
    c[(0, 0)] = init_var;
    for t in 1..n {
        c[(t, t)] = p.y * p.y * c[(t - 1, t - 1)] + p.z * p.z;
    }
    for t in 0..n {
        for u in 0..t {
            let cov = p.y.powi((t - u) as i32) * c[(u, u)];
            c[(t, u)] = cov;
            c[(u, t)] = cov;
        }
    }

    let sigma = &c + DMatrix::identity(n, n) * (p.v * p.v);
    let chol = Cholesky::new(sigma).expect("observation covariance is PD");
    let resid = DVector::from_iterator(n, s.iter().zip(&mu).map(|(si, mi)| si - mi));
    let weighted = chol.solve(&resid);
    let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let ll = -0.5 * (n as f64 * LN_2PI + ln_det + resid.dot(&weighted));

    // Conditioning the latent path on the observations: Cov(latent, obs) = C.
    let cond_mean = DVector::from_vec(mu) + &c * &weighted;
    let cond_cov = &c - &c * chol.solve(&c);
    (ll, cond_mean.iter().copied().collect(), (0..n).map(|t| cond_cov[(t, t)]).collect())
}

#[test]
fn likelihood_matches_hand_computed_two_point_case() {
    // x=0, y=0.5, z=1, v=0, s=[1,2]:
    //   prior var 1/(1-0.25) = 4/3, zero innovation at t=0;
    //   t=1 predicts 0.5 with variance 1, innovation 1.5.
    // ll = -0.5 (2 ln 2pi + ln(4/3) + 2.25)
    let params = StateSpaceParams::new(0.0, 0.5, 1.0, 0.0).unwrap();
    let out = kalman_filter(&spread_of(vec![1.0, 2.0]), &params).unwrap();
    assert_abs_diff_eq!(out.log_likelihood, -3.106718102635236, epsilon = 1e-12);
}

#[test]
fn recursion_agrees_with_dense_gaussian_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..24 {
        let n = rng.gen_range(3..=10);
        let params = StateSpaceParams::new(
            rng.gen_range(0.0..0.5),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..1.0),
            // Exercise the exactly-zero measurement noise branch regularly.
            if trial % 4 == 0 {
                0.0
            } else {
                rng.gen_range(0.01..0.5)
            },
        )
        .unwrap();
        let values: Vec<f64> = (0..n).map(|_| 2.0 + rng.gen_range(-1.5..1.5)).collect();
        let spread = spread_of(values.clone());

        let out = kalman_filter(&spread, &params).unwrap();
        let (ll_ref, mean_ref, var_ref) = dense_reference(&values, &params);

        let tol = 1e-9 * out.log_likelihood.abs().max(1.0);
        assert!(
            (out.log_likelihood - ll_ref).abs() <= tol,
            "trial {trial}: recursive ll {} vs dense {ll_ref}",
            out.log_likelihood
        );
        for t in 0..n {
            assert_abs_diff_eq!(out.smoothed_means[t], mean_ref[t], epsilon = 1e-8);
            assert_abs_diff_eq!(out.smoothed_variances[t], var_ref[t], epsilon = 1e-8);
        }
    }
}

#[test]
fn prefix_likelihoods_are_consistent() {
    // The filter's ll over s[0..k] must equal running it on the truncated
    // series: the recursion factorizes the joint density one step at a time.
    let params = StateSpaceParams::new(0.2, 0.7, 0.3, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..3.0)).collect();

    let mut previous = f64::NEG_INFINITY;
    for k in 2..=values.len() {
        let out = kalman_filter(&spread_of(values[..k].to_vec()), &params).unwrap();
        let (ll_ref, _, _) = dense_reference(&values[..k], &params);
        assert_abs_diff_eq!(out.log_likelihood, ll_ref, epsilon = 1e-9);
        assert_ne!(out.log_likelihood, previous);
        previous = out.log_likelihood;
    }
}
