//! Johansen cointegration testing for pairs of log-price series.
//!
//! A pair is modelled as a VECM, `dy_t = mu + A y_{t-1} + sum Gamma_i
//! dy_{t-i} + w_t`. The rank of the long-run matrix `A` encodes
//! cointegration; it is read off the reduced-rank eigenproblem built from
//! two auxiliary regressions: residuals of `dy_t` and of `y_{t-1}`, each on
//! the constant and the lagged differences. The trace statistic
//! `-T sum ln(1 - lambda_i)` over the smaller eigenvalues is compared
//! against 5% critical values, and the hedge ratio comes from the
//! eigenvector of the dominant eigenvalue.

use nalgebra::{Cholesky, DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::exec;
use crate::market_data::{PriceSeries, SplitSpec};

/// 5% critical values for the Johansen trace test, bivariate system with an
/// unrestricted constant, indexed by the hypothesized rank r = 0, 1.
/// Source: MacKinnon, Haug & Michelis (1999), "Numerical distribution
/// functions of likelihood ratio tests for cointegration", Journal of Applied
/// Econometrics 14(5) — trace statistic, Case III, for 2 and 1 remaining
/// stochastic trends.
pub const TRACE_CRITICAL_5PCT: [f64; 2] = [15.4943, 3.8415];

/// Relative singular-value cutoff below which a design matrix counts as
/// singular.
const SINGULARITY_TOLERANCE: f64 = 1e-12;

/// Estimated VECM for one pair.
#[derive(Debug, Clone)]
pub struct VecmFit {
    /// VAR lag order p; the difference form uses p - 1 lagged differences.
    pub lag_order: usize,
    /// Long-run impact matrix A.
    pub long_run_matrix: Matrix2<f64>,
    /// Short-run matrices Gamma_1 .. Gamma_{p-1}.
    pub gammas: Vec<Matrix2<f64>>,
    /// Drift vector mu.
    pub drift: Vector2<f64>,
    /// Regression residuals w_t, one row per effective observation
    /// (series length minus lag_order).
    pub residuals: DMatrix<f64>,
    /// OLS standard errors of the entries of `long_run_matrix`.
    pub long_run_std_errors: Matrix2<f64>,
    moments: Moments,
}

/// Product-moment matrices of the two auxiliary regressions, the sufficient
/// statistics of the Johansen eigenproblem.
#[derive(Debug, Clone)]
struct Moments {
    s00: Matrix2<f64>,
    s01: Matrix2<f64>,
    s11: Matrix2<f64>,
    rows: usize,
}

/// Johansen test outcome for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CointegrationResult {
    /// Eigenvalues of the reduced-rank problem, descending, each in [0, 1).
    pub eigenvalues: [f64; 2],
    /// Trace statistics for the rank hypotheses r = 0 and r <= 1.
    pub trace_statistics: [f64; 2],
    /// The embedded 5% critical values the statistics were compared against.
    pub critical_values_5pct: [f64; 2],
    /// Count of rank hypotheses rejected sequentially at 5%.
    pub rank: usize,
    /// Dominant eigenvector scaled so its first component is 1; the spread is
    /// `log P_a + hedge_ratio * log P_b`.
    pub cointegration_vector: [f64; 2],
    /// `b/a` of the dominant eigenvector; present only when rank >= 1.
    pub hedge_ratio: Option<f64>,
    /// Lag order of the underlying VECM.
    pub lag_order: usize,
}

fn check_aligned(a: &PriceSeries, b: &PriceSeries) -> Result<()> {
    if a.dates != b.dates {
        return Err(Error::Misaligned(format!(
            "'{}' and '{}' do not share a calendar",
            a.commodity_id, b.commodity_id
        )));
    }
    Ok(())
}

/// Least-squares solve of `x beta = y` for every column of `y`, with a
/// relative singular-value cutoff. Returns the coefficients and the diagonal
/// of `(x'x)^{-1}` (needed for standard errors).
fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv < SINGULARITY_TOLERANCE * max_sv {
        return Err(Error::SingularRegressor(
            "design matrix is numerically rank-deficient (constant or collinear series)"
                .to_string(),
        ));
    }
    let beta = svd
        .solve(y, SINGULARITY_TOLERANCE * max_sv)
        .map_err(|e| Error::SingularRegressor(e.to_string()))?;

    // diag((X'X)^{-1}) = sum_k V[j,k]^2 / s_k^2, with V = v_t'.
    let v_t = svd.v_t.as_ref().expect("svd computed with V");
    let k = x.ncols();
    let mut xtx_inv_diag = vec![0.0; k];
    for j in 0..k {
        for (r, s) in svd.singular_values.iter().enumerate() {
            let vjk = v_t[(r, j)];
            xtx_inv_diag[j] += vjk * vjk / (s * s);
        }
    }
    Ok((beta, xtx_inv_diag))
}

/// Fits the VECM `dy_t = mu + A y_{t-1} + sum Gamma_i dy_{t-i} + w_t` by
/// least squares at the given VAR lag order (p >= 1, series length > p + 2).
pub fn fit_vecm(a: &PriceSeries, b: &PriceSeries, lag_order: usize) -> Result<VecmFit> {
    check_aligned(a, b)?;
    if lag_order < 1 {
        return Err(Error::InvalidConfig(format!(
            "lag order {lag_order} must be at least 1"
        )));
    }
    let t_total = a.len();
    if t_total <= lag_order + 2 {
        return Err(Error::TooShort(format!(
            "{t_total} observations cannot support lag order {lag_order}"
        )));
    }

    let p = lag_order;
    let rows = t_total - p;
    let ya = &a.log_prices;
    let yb = &b.log_prices;
    let n_lagged = 2 * (p - 1);
    let n_z2 = 1 + n_lagged;

    let mut z0 = DMatrix::zeros(rows, 2);
    let mut z1 = DMatrix::zeros(rows, 2);
    let mut z2 = DMatrix::zeros(rows, n_z2);
    for (r, t) in (p..t_total).enumerate() {
        z0[(r, 0)] = ya[t] - ya[t - 1];
        z0[(r, 1)] = yb[t] - yb[t - 1];
        z1[(r, 0)] = ya[t - 1];
        z1[(r, 1)] = yb[t - 1];
        z2[(r, 0)] = 1.0;
        for l in 1..p {
            z2[(r, 1 + 2 * (l - 1))] = ya[t - l] - ya[t - l - 1];
            z2[(r, 2 + 2 * (l - 1))] = yb[t - l] - yb[t - l - 1];
        }
    }

    // Auxiliary regressions for the eigenproblem's moment matrices.
    let (beta0, _) = ols(&z2, &z0)?;
    let (beta1, _) = ols(&z2, &z1)?;
    let r0 = &z0 - &z2 * beta0;
    let r1 = &z1 - &z2 * beta1;
    let scale = 1.0 / rows as f64;
    let to2 = |m: DMatrix<f64>| Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let s00 = to2(r0.transpose() * &r0 * scale);
    let s01 = to2(r0.transpose() * &r1 * scale);
    let s11 = to2(r1.transpose() * &r1 * scale);

    // One joint regression for the reported coefficients and residuals.
    let mut w = DMatrix::zeros(rows, n_z2 + 2);
    w.view_mut((0, 0), (rows, n_z2)).copy_from(&z2);
    w.view_mut((0, n_z2), (rows, 2)).copy_from(&z1);
    let (coeffs, xtx_inv_diag) = ols(&w, &z0)?;
    let residuals = &z0 - &w * &coeffs;

    let drift = Vector2::new(coeffs[(0, 0)], coeffs[(0, 1)]);
    let mut gammas = Vec::with_capacity(p - 1);
    for l in 0..p - 1 {
        let row_a = 1 + 2 * l;
        gammas.push(Matrix2::new(
            coeffs[(row_a, 0)],
            coeffs[(row_a + 1, 0)],
            coeffs[(row_a, 1)],
            coeffs[(row_a + 1, 1)],
        ));
    }
    let long_run_matrix = Matrix2::new(
        coeffs[(n_z2, 0)],
        coeffs[(n_z2 + 1, 0)],
        coeffs[(n_z2, 1)],
        coeffs[(n_z2 + 1, 1)],
    );

    let dof = rows.saturating_sub(w.ncols()).max(1) as f64;
    let mut long_run_std_errors = Matrix2::zeros();
    for eq in 0..2 {
        let rss: f64 = residuals.column(eq).iter().map(|e| e * e).sum();
        let sigma2 = rss / dof;
        for j in 0..2 {
            long_run_std_errors[(eq, j)] = (sigma2 * xtx_inv_diag[n_z2 + j]).sqrt();
        }
    }

    Ok(VecmFit {
        lag_order,
        long_run_matrix,
        gammas,
        drift,
        residuals,
        long_run_std_errors,
        moments: Moments {
            s00,
            s01,
            s11,
            rows,
        },
    })
}

/// Picks the VAR lag order in `[1, max_lag]` minimizing BIC.
///
/// All candidates are fitted on the common effective sample (conditioning on
/// `max_lag` initial observations) so the criteria are comparable; ties break
/// to the smaller lag.
pub fn select_lag(a: &PriceSeries, b: &PriceSeries, max_lag: usize) -> Result<usize> {
    check_aligned(a, b)?;
    if max_lag < 1 {
        return Err(Error::InvalidConfig(
            "max lag must be at least 1".to_string(),
        ));
    }
    let t_total = a.len();
    if t_total <= max_lag + 2 {
        return Err(Error::TooShort(format!(
            "{t_total} observations cannot support max lag {max_lag}"
        )));
    }

    let rows = t_total - max_lag;
    let ya = &a.log_prices;
    let yb = &b.log_prices;
    let mut y = DMatrix::zeros(rows, 2);
    for (r, t) in (max_lag..t_total).enumerate() {
        y[(r, 0)] = ya[t];
        y[(r, 1)] = yb[t];
    }

    let mut best = (1usize, f64::INFINITY);
    for p in 1..=max_lag {
        let mut x = DMatrix::zeros(rows, 1 + 2 * p);
        for (r, t) in (max_lag..t_total).enumerate() {
            x[(r, 0)] = 1.0;
            for l in 1..=p {
                x[(r, 1 + 2 * (l - 1))] = ya[t - l];
                x[(r, 2 + 2 * (l - 1))] = yb[t - l];
            }
        }
        let (beta, _) = ols(&x, &y)?;
        let resid = &y - &x * beta;
        let n = rows as f64;
        let cov = resid.transpose() * &resid / n;
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
        if !(det > 0.0) {
            return Err(Error::SingularRegressor(format!(
                "residual covariance is singular at lag {p}"
            )));
        }
        let n_params = (2 * (2 * p + 1)) as f64;
        let bic = det.ln() + n_params * n.ln() / n;
        if bic < best.1 {
            best = (p, bic);
        }
    }
    Ok(best.0)
}

/// Runs the Johansen trace test on a fitted VECM.
///
/// Solves the generalized eigenproblem through a Cholesky factor of S11 so
/// the 2x2 eigen decomposition is symmetric, determines the rank by the
/// sequential 5% procedure, and extracts the hedge ratio from the dominant
/// eigenvector normalized to a first component of 1.
pub fn johansen_test(fit: &VecmFit) -> Result<CointegrationResult> {
    let m = &fit.moments;
    let chol = Cholesky::new(m.s11).ok_or_else(|| {
        Error::EigenFailure("S11 is not positive definite".to_string())
    })?;
    let s00_inv = m
        .s00
        .try_inverse()
        .ok_or_else(|| Error::SingularRegressor("S00 is singular".to_string()))?;
    let k = m.s01.transpose() * s00_inv * m.s01;

    let l = chol.l();
    let a1 = l
        .solve_lower_triangular(&k)
        .ok_or_else(|| Error::EigenFailure("triangular solve failed".to_string()))?;
    let sym_raw = l
        .solve_lower_triangular(&a1.transpose())
        .ok_or_else(|| Error::EigenFailure("triangular solve failed".to_string()))?;
    let sym = (sym_raw + sym_raw.transpose()) * 0.5;

    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order = [0usize, 1];
    if eig.eigenvalues[1] > eig.eigenvalues[0] {
        order = [1, 0];
    }
    let mut eigenvalues = [0.0f64; 2];
    for (slot, &idx) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !lambda.is_finite() || !(-1e-8..1.0).contains(&lambda) {
            return Err(Error::EigenFailure(format!(
                "eigenvalue {lambda} outside [0, 1)"
            )));
        }
        eigenvalues[slot] = lambda.max(0.0);
    }

    // Back-transform the dominant eigenvector: v = L^{-T} u.
    let u = eig.eigenvectors.column(order[0]).into_owned();
    let v = l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or_else(|| Error::EigenFailure("triangular solve failed".to_string()))?;
    if !v[0].is_finite() || !v[1].is_finite() {
        return Err(Error::EigenFailure("non-finite eigenvector".to_string()));
    }
    if v[0].abs() < 1e-10 * v.norm() {
        return Err(Error::DegenerateVector);
    }
    let ratio = v[1] / v[0];

    let n = m.rows as f64;
    let trace_statistics = [
        -n * ((-eigenvalues[0]).ln_1p() + (-eigenvalues[1]).ln_1p()),
        -n * (-eigenvalues[1]).ln_1p(),
    ];
    let mut rank = 0;
    if trace_statistics[0] > TRACE_CRITICAL_5PCT[0] {
        rank = 1;
        if trace_statistics[1] > TRACE_CRITICAL_5PCT[1] {
            rank = 2;
        }
    }

    Ok(CointegrationResult {
        eigenvalues,
        trace_statistics,
        critical_values_5pct: TRACE_CRITICAL_5PCT,
        rank,
        cointegration_vector: [1.0, ratio],
        hedge_ratio: (rank >= 1).then_some(ratio),
        lag_order: fit.lag_order,
    })
}

/// One successfully tested pair in a universe scan.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub series_a: String,
    pub series_b: String,
    pub result: CointegrationResult,
}

/// One pair whose test failed; the scan carries on.
#[derive(Debug, Clone)]
pub struct PairFailure {
    pub series_a: String,
    pub series_b: String,
    pub error: Error,
}

/// Outcome of scanning every unordered pair in a universe.
#[derive(Debug, Clone)]
pub struct PairScan {
    /// Every pair that produced a test result, in (i, j) index order.
    pub tested: Vec<PairResult>,
    /// Pairs whose test errored.
    pub failures: Vec<PairFailure>,
}

impl PairScan {
    /// The pairs flagged cointegrated (rank >= 1).
    pub fn cointegrated(&self) -> impl Iterator<Item = &PairResult> {
        self.tested.iter().filter(|p| p.result.rank >= 1)
    }
}

/// Tests all C(n,2) pairs on their training segments: split, lag selection by
/// BIC, VECM fit, Johansen test. Per-pair errors become failure records
/// rather than aborting the scan. Pairs are independent and evaluated
/// concurrently under the `parallel` feature.
pub fn scan_pairs(
    universe: &[PriceSeries],
    split: SplitSpec,
    max_lag: usize,
) -> Result<PairScan> {
    let mut index_pairs = Vec::new();
    for i in 0..universe.len() {
        for j in i + 1..universe.len() {
            index_pairs.push((i, j));
        }
    }

    let outcomes = exec::map_slice(&index_pairs, |&(i, j)| {
        let a = &universe[i];
        let b = &universe[j];
        let tested = (|| -> Result<CointegrationResult> {
            let dataset = split.apply(a.clone(), b.clone())?;
            let (train_a, train_b) = dataset.training();
            let lag = select_lag(&train_a, &train_b, max_lag)?;
            let fit = fit_vecm(&train_a, &train_b, lag)?;
            johansen_test(&fit)
        })();
        (a.commodity_id.clone(), b.commodity_id.clone(), tested)
    });

    let mut scan = PairScan {
        tested: Vec::new(),
        failures: Vec::new(),
    };
    for (series_a, series_b, outcome) in outcomes {
        match outcome {
            Ok(result) => scan.tested.push(PairResult {
                series_a,
                series_b,
                result,
            }),
            Err(error) => scan.failures.push(PairFailure {
                series_a,
                series_b,
                error,
            }),
        }
    }
    Ok(scan)
}
