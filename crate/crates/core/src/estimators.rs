//! Best-subset (`l0`), Lasso and thresholded-Lasso estimators.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{binomial, columns, psd_pinv_solve};
use crate::{Error, Result, DEFAULT_BUDGET};

/// Observations `y = X θ* + w` with noise level `sigma` and sparsity budget `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma: f64,
    k: usize,
}

impl RegressionProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, sigma: f64, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::ShapeError(format!("design is {n}x{d}")));
        }
        if y.len() != n {
            return Err(Error::ShapeError(format!("response has length {}, design has {n} rows", y.len())));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma {sigma} must be >= 0")));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!("sparsity {k} outside 1..={d}")));
        }
        Ok(RegressionProblem { x, y, sigma, k })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    fn residual_sq(&self, theta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * theta).norm_squared()
    }
}

/// An estimated coefficient vector. `support` holds the 0-based indices of
/// the nonzero coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub theta: Vec<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
}

impl Estimate {
    pub fn from_theta(theta: Vec<f64>, objective: f64) -> Self {
        let support = theta.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect();
        Estimate { theta, support, objective }
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }
}

/// Minimum-norm minimiser of `‖y − X_S β‖₂²`.
pub fn least_squares(xs: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if xs.nrows() != y.len() {
        return Err(Error::ShapeError(format!("{} rows against a response of length {}", xs.nrows(), y.len())));
    }
    if xs.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = xs.clone().svd(true, true);
    let top = svd.singular_values.max();
    let eps = top * f64::EPSILON * xs.nrows().max(xs.ncols()) as f64;
    svd.solve(y, eps).map_err(|e| Error::ShapeError(e.into()))
}

/// Exhaustive best-subset estimator with the default budget.
pub fn l0_estimate(prob: &RegressionProblem) -> Result<Estimate> {
    l0_estimate_with_budget(prob, DEFAULT_BUDGET)
}

/// Minimises `‖y − Xθ‖₂²` over all supports of size exactly `k`.
///
/// Supports are visited in lexicographic order; a later support replaces the
/// incumbent only when it improves the residual by more than a relative
/// `1e-12`, so near-ties resolve to the lexicographically smallest support.
pub fn l0_estimate_with_budget(prob: &RegressionProblem, budget: u128) -> Result<Estimate> {
    let (d, k) = (prob.d(), prob.k());
    let needed = binomial(d, k);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let x = &prob.x;
    let y = &prob.y;
    let gram = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let tie = 1e-12 * y.norm_squared().max(f64::MIN_POSITIVE);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for support in (0..d).combinations(k) {
        let g = DMatrix::from_fn(k, k, |i, j| gram[(support[i], support[j])]);
        let b = DVector::from_fn(k, |i, _| xty[support[i]]);
        let beta = psd_pinv_solve(&g, &b);
        let mut r = y.clone();
        for (i, &j) in support.iter().enumerate() {
            r.axpy(-beta[i], &x.column(j), 1.0);
        }
        let res = r.norm_squared();
        match &best {
            Some((incumbent, _)) if res >= incumbent - tie => {}
            _ => best = Some((res, support)),
        }
    }
    let (_, support) = best.expect("at least one support");
    let beta = least_squares(&columns(x, &support), y)?;
    let mut theta = DVector::zeros(d);
    for (i, &j) in support.iter().enumerate() {
        theta[j] = beta[i];
    }
    let objective = prob.residual_sq(&theta);
    Ok(Estimate::from_theta(theta.as_slice().to_vec(), objective))
}

/// Stopping rules for [`lasso`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Largest coordinate change in a sweep that counts as converged.
    pub tol: f64,
    /// Tolerance on the subgradient optimality certificate.
    pub certificate_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-10, certificate_tol: 1e-8, max_sweeps: 100_000 }
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// `(1/2n)‖y − Xθ‖₂² + λ‖θ‖₁`.
pub fn lasso_objective(prob: &RegressionProblem, theta: &DVector<f64>, lambda: f64) -> f64 {
    prob.residual_sq(theta) / (2.0 * prob.n() as f64) + lambda * theta.lp_norm(1)
}

/// Largest violation of the Lasso optimality conditions at `theta`:
/// `|X_jᵀr/n| ≤ λ` off the support and `X_jᵀr/n = λ·sign(θ_j)` on it.
pub fn lasso_certificate_gap(prob: &RegressionProblem, theta: &DVector<f64>, lambda: f64) -> f64 {
    let n = prob.n() as f64;
    let r = &prob.y - &prob.x * theta;
    let corr = prob.x.tr_mul(&r) / n;
    corr.iter()
        .zip(theta.iter())
        .map(|(&c, &t)| if t == 0.0 { (c.abs() - lambda).max(0.0) } else { (c - lambda * t.signum()).abs() })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent for the Lasso.
///
/// Returns once a sweep moves no coordinate by more than `opts.tol` and the
/// subgradient certificate holds at `opts.certificate_tol`. Otherwise fails
/// with [`Error::NonConverged`] carrying the last iterate.
pub fn lasso(prob: &RegressionProblem, lambda: f64, opts: &LassoOptions) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be >= 0")));
    }
    let (n, d) = (prob.n() as f64, prob.d());
    let x = &prob.x;
    let col_sq: Vec<f64> = (0..d).map(|j| x.column(j).norm_squared() / n).collect();
    let mut theta = DVector::<f64>::zeros(d);
    let mut r = prob.y.clone();

    for sweep in 1..=opts.max_sweeps {
        let mut max_delta = 0.0_f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let z = col.dot(&r) / n + col_sq[j] * theta[j];
            let updated = soft_threshold(z, lambda) / col_sq[j];
            let delta = updated - theta[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                theta[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < opts.tol {
            r = &prob.y - x * &theta;
            if lasso_certificate_gap(prob, &theta, lambda) <= opts.certificate_tol {
                let objective = lasso_objective(prob, &theta, lambda);
                return Ok(Estimate::from_theta(theta.as_slice().to_vec(), objective));
            }
        }
        if sweep == opts.max_sweeps {
            break;
        }
    }
    let objective = lasso_objective(prob, &theta, lambda);
    Err(Error::NonConverged {
        sweeps: opts.max_sweeps,
        best: Box::new(Estimate::from_theta(theta.as_slice().to_vec(), objective)),
    })
}

/// Keeps the `k` largest-magnitude entries; ties keep the smaller index.
pub fn threshold_topk(theta: &[f64], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    let mut out = alloc::vec![0.0; theta.len()];
    for &j in order.iter().take(k) {
        out[j] = theta[j];
    }
    out
}

/// The standard regularisation level `4σ√(ln d / n)`.
pub fn standard_lambda(sigma: f64, n: usize, d: usize) -> f64 {
    4.0 * sigma * libm::sqrt(libm::log(d as f64) / n as f64)
}

/// Lasso at the standard level followed by top-`k` truncation. The reported
/// objective is the Lasso objective evaluated at the truncated vector.
pub fn thresholded_lasso(prob: &RegressionProblem) -> Result<Estimate> {
    thresholded_lasso_with(prob, &LassoOptions::default())
}

pub fn thresholded_lasso_with(prob: &RegressionProblem, opts: &LassoOptions) -> Result<Estimate> {
    if !(prob.sigma > 0.0) {
        return Err(Error::InvalidParameter("thresholded Lasso needs sigma > 0".into()));
    }
    if prob.d() < 2 {
        return Err(Error::InvalidParameter("thresholded Lasso needs d >= 2".into()));
    }
    let lambda = standard_lambda(prob.sigma, prob.n(), prob.d());
    let truncate = |est: &Estimate| {
        let theta = threshold_topk(&est.theta, prob.k);
        let objective = lasso_objective(prob, &DVector::from_column_slice(&theta), lambda);
        Estimate::from_theta(theta, objective)
    };
    match lasso(prob, lambda, opts) {
        Ok(est) => Ok(truncate(&est)),
        Err(Error::NonConverged { sweeps, best }) => {
            Err(Error::NonConverged { sweeps, best: Box::new(truncate(&best)) })
        }
        Err(e) => Err(e),
    }
}

/// Something that maps a regression problem to an estimate.
pub trait SparseEstimator {
    fn estimate(&self, prob: &RegressionProblem) -> Result<Estimate>;
}

/// The estimators used by the experiments, with their default settings.
/// `Lasso` runs at the standard level `4σ√(ln d / n)` without truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "l0")]
    L0,
    #[serde(rename = "lasso")]
    Lasso,
    #[serde(rename = "thresh-lasso")]
    ThresholdedLasso,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::L0 => "l0",
            EstimatorKind::Lasso => "lasso",
            EstimatorKind::ThresholdedLasso => "thresh-lasso",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "l0" => Some(EstimatorKind::L0),
            "lasso" => Some(EstimatorKind::Lasso),
            "thresh-lasso" => Some(EstimatorKind::ThresholdedLasso),
            _ => None,
        }
    }
}

impl SparseEstimator for EstimatorKind {
    fn estimate(&self, prob: &RegressionProblem) -> Result<Estimate> {
        match self {
            EstimatorKind::L0 => l0_estimate(prob),
            EstimatorKind::Lasso => {
                let lambda = standard_lambda(prob.sigma, prob.n(), prob.d());
                lasso(prob, lambda, &LassoOptions::default())
            }
            EstimatorKind::ThresholdedLasso => thresholded_lasso(prob),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use alloc::vec;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r))
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn problem_validation() {
        let x = DMatrix::zeros(3, 2);
        assert!(RegressionProblem::new(x.clone(), DVector::zeros(2), 1.0, 1).is_err());
        assert!(RegressionProblem::new(x.clone(), DVector::zeros(3), 1.0, 3).is_err());
        assert!(RegressionProblem::new(x.clone(), DVector::zeros(3), -1.0, 1).is_err());
        assert!(RegressionProblem::new(x, DVector::zeros(3), 0.0, 2).is_ok());
    }

    #[test]
    fn least_squares_identity() {
        let y = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let beta = least_squares(&DMatrix::identity(3, 3), &y).unwrap();
        assert!(close(beta.as_slice(), y.as_slice(), 1e-14));
        assert!(matches!(least_squares(&DMatrix::identity(2, 2), &y), Err(Error::ShapeError(_))));
    }

    #[test]
    fn least_squares_duplicate_column_min_norm() {
        let c = [1.0, 2.0, -1.0, 0.5];
        let xs = DMatrix::from_fn(4, 2, |i, _| c[i]);
        let y = DVector::from_fn(4, |i, _| 2.0 * c[i]);
        let beta = least_squares(&xs, &y).unwrap();
        assert!(close(beta.as_slice(), &[1.0, 1.0], 1e-12));
    }

    #[test]
    fn least_squares_recovers_coefficients() {
        let xs = gaussian(10, 3, 4);
        let truth = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let y = &xs * &truth;
        let beta = least_squares(&xs, &y).unwrap();
        assert!(close(beta.as_slice(), truth.as_slice(), 1e-10));
    }

    #[test]
    fn l0_noiseless_recovery() {
        let x = gaussian(20, 8, 9);
        let mut truth = DVector::zeros(8);
        truth[2] = 1.5;
        truth[6] = -0.7;
        let y = &x * &truth;
        let est = l0_estimate(&RegressionProblem::new(x.clone(), y.clone(), 0.0, 2).unwrap()).unwrap();
        assert_eq!(est.support, vec![2, 6]);
        assert!(est.objective < 1e-20);
        assert!((&x * est.vector() - &y).norm() < 1e-10);
    }

    #[test]
    fn l0_full_support_is_least_squares() {
        let x = gaussian(12, 4, 2);
        let y = DVector::from_fn(12, |i, _| (i as f64).sin());
        let est = l0_estimate(&RegressionProblem::new(x.clone(), y.clone(), 1.0, 4).unwrap()).unwrap();
        let beta = least_squares(&x, &y).unwrap();
        assert!(close(&est.theta, beta.as_slice(), 1e-10));
    }

    #[test]
    fn l0_orthonormal_picks_largest_correlation() {
        // orthonormal columns: scaled Hadamard
        #[rustfmt::skip]
        let h: DMatrix<f64> = DMatrix::from_row_slice(4, 4, &[
            1.0, 1.0, 1.0, 1.0,
            1.0, -1.0, 1.0, -1.0,
            1.0, 1.0, -1.0, -1.0,
            1.0, -1.0, -1.0, 1.0,
        ]) * 0.5;
        let y = DVector::from_vec(vec![0.3, -1.1, 0.4, 2.0]);
        let corr = h.tr_mul(&y);
        let argmax = (0..4).max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs())).unwrap();
        let est = l0_estimate(&RegressionProblem::new(h, y, 1.0, 1).unwrap()).unwrap();
        assert_eq!(est.support, vec![argmax]);
        assert!((est.theta[argmax] - corr[argmax]).abs() < 1e-12);
    }

    #[test]
    fn l0_budget() {
        let x = gaussian(10, 20, 1);
        let prob = RegressionProblem::new(x, DVector::zeros(10), 1.0, 10).unwrap();
        assert!(matches!(l0_estimate_with_budget(&prob, 1000), Err(Error::BudgetExceeded { needed: 184_756, .. })));
    }

    #[test]
    fn l0_ties_resolve_lexicographically() {
        let c = [1.0, 0.0, 2.0];
        let x = DMatrix::from_fn(3, 3, |i, j| if j < 2 { c[i] } else { (i == 1) as u8 as f64 });
        let y = DVector::from_fn(3, |i, _| c[i]);
        let est = l0_estimate(&RegressionProblem::new(x, y, 0.0, 1).unwrap()).unwrap();
        assert_eq!(est.support, vec![0]);
    }

    #[test]
    fn lasso_zero_lambda_is_ols() {
        let x = gaussian(30, 4, 11);
        let y = DVector::from_fn(30, |i, _| (0.3 * i as f64).cos());
        let prob = RegressionProblem::new(x.clone(), y.clone(), 1.0, 4).unwrap();
        let est = lasso(&prob, 0.0, &LassoOptions::default()).unwrap();
        let beta = least_squares(&x, &y).unwrap();
        assert!(close(&est.theta, beta.as_slice(), 1e-7));
    }

    #[test]
    fn lasso_univariate_soft_threshold() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = &x * 2.0;
        let prob = RegressionProblem::new(x, y.column(0).into_owned(), 1.0, 1).unwrap();
        let est = lasso(&prob, 0.5, &LassoOptions::default()).unwrap();
        assert!((est.theta[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lasso_orthonormal_closed_form() {
        // XᵀX/n = I with n = 4
        #[rustfmt::skip]
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 1.0, 1.0,
            1.0, -1.0, 1.0,
            1.0, 1.0, -1.0,
            1.0, -1.0, -1.0,
        ]);
        let y = DVector::from_vec(vec![2.0, 0.5, -1.0, 0.7]);
        let prob = RegressionProblem::new(x.clone(), y.clone(), 1.0, 3).unwrap();
        let lambda = 0.3;
        let est = lasso(&prob, lambda, &LassoOptions::default()).unwrap();
        let z = x.tr_mul(&y) / 4.0;
        let expected: Vec<f64> = z.iter().map(|&v| soft_threshold(v, lambda)).collect();
        assert!(close(&est.theta, &expected, 1e-12));
        assert!(lasso_certificate_gap(&prob, &est.vector(), lambda) <= 1e-8);
    }

    #[test]
    fn lasso_zero_column_pinned() {
        let mut x = gaussian(15, 3, 5);
        x.column_mut(1).fill(0.0);
        let y = DVector::from_fn(15, |i, _| i as f64 * 0.1);
        let prob = RegressionProblem::new(x, y, 1.0, 2).unwrap();
        let est = lasso(&prob, 0.01, &LassoOptions::default()).unwrap();
        assert_eq!(est.theta[1], 0.0);
    }

    #[test]
    fn lasso_reports_nonconvergence() {
        let x = gaussian(20, 10, 3);
        let y = DVector::from_fn(20, |i, _| i as f64);
        let prob = RegressionProblem::new(x, y, 1.0, 3).unwrap();
        let opts = LassoOptions { max_sweeps: 1, ..LassoOptions::default() };
        match lasso(&prob, 0.01, &opts) {
            Err(Error::NonConverged { sweeps: 1, best }) => assert_eq!(best.theta.len(), 10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(lasso(&prob, -1.0, &opts), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(threshold_topk(&[3.0, -1.0, 2.0, 0.0], 2), vec![3.0, 0.0, 2.0, 0.0]);
        assert_eq!(threshold_topk(&[3.0, -1.0, 2.0, 0.0], 4), vec![3.0, -1.0, 2.0, 0.0]);
        assert_eq!(threshold_topk(&[1.0, -1.0, 0.0], 1), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn thresholded_lasso_preconditions() {
        let x = gaussian(10, 4, 1);
        let y = DVector::zeros(10);
        let prob = RegressionProblem::new(x.clone(), y.clone(), 0.0, 2).unwrap();
        assert!(matches!(thresholded_lasso(&prob), Err(Error::InvalidParameter(_))));
        let single = RegressionProblem::new(x.columns(0, 1).into_owned(), y, 1.0, 1).unwrap();
        assert!(matches!(thresholded_lasso(&single), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn thresholded_lasso_small_sigma_recovers_prediction() {
        let x = gaussian(60, 10, 21);
        let mut truth = DVector::zeros(10);
        truth[1] = 2.0;
        truth[7] = -1.0;
        let y = &x * &truth;
        let prob = RegressionProblem::new(x.clone(), y.clone(), 1e-9, 2).unwrap();
        let est = thresholded_lasso(&prob).unwrap();
        assert_eq!(est.support, vec![1, 7]);
        assert!((&x * est.vector() - &y).norm() / 60f64.sqrt() < 1e-6);
    }

    #[test]
    fn estimator_names_round_trip() {
        for kind in [EstimatorKind::L0, EstimatorKind::Lasso, EstimatorKind::ThresholdedLasso] {
            assert_eq!(EstimatorKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(EstimatorKind::from_name("ridge"), None);
    }
}
