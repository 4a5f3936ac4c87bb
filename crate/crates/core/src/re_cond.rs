//! Cone geometry and restricted-eigenvalue (RE) tooling.
//!
//! The RE constant of `X` is the largest `γ` with `‖Xθ‖₂²/n ≥ γ‖θ‖₂²` for
//! every `θ` in the union of the cones `C(S) = {θ : ‖θ_S̄‖₁ ≤ 3‖θ_S‖₁}` over
//! supports of size `k`. Computing it exactly is intractable, so
//! [`re_upper_bound`] returns the smallest Rayleigh quotient it can find on
//! the cones: an upper bound on the true constant, never a lower one.

use alloc::format;
use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{binomial, gram, lambda_max, lambda_min, principal, sym_eigen};
use crate::seed::rng;
use crate::{Error, Result};

/// Constant of the cone `‖θ_S̄‖₁ ≤ 3‖θ_S‖₁`.
pub const CONE_FACTOR: f64 = 3.0;

/// A cone `C(S)`; `S` is kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub support: Vec<usize>,
}

impl ConeSpec {
    pub fn new(mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        support.dedup();
        ConeSpec { support }
    }

    pub fn factor(&self) -> f64 {
        CONE_FACTOR
    }

    /// `(‖θ_S‖₁, ‖θ_S̄‖₁)`.
    pub fn l1_split(&self, theta: &[f64]) -> (f64, f64) {
        let mut on = 0.0;
        let mut off = 0.0;
        for (j, v) in theta.iter().enumerate() {
            if self.support.binary_search(&j).is_ok() {
                on += v.abs();
            } else {
                off += v.abs();
            }
        }
        (on, off)
    }
}

/// Whether `theta` satisfies `‖θ_S̄‖₁ ≤ 3‖θ_S‖₁`.
pub fn in_cone(theta: &[f64], spec: &ConeSpec) -> bool {
    let (on, off) = spec.l1_split(theta);
    off <= CONE_FACTOR * on
}

/// `‖Xθ‖₂² / (n‖θ‖₂²)`.
pub fn rayleigh(x: &DMatrix<f64>, theta: &DVector<f64>) -> Result<f64> {
    let norm_sq = theta.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((x * theta).norm_squared() / (x.nrows() as f64 * norm_sq))
}

/// Result of [`re_upper_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REEstimate {
    pub gamma_hat: f64,
    pub witness: Vec<f64>,
    pub witness_support: Vec<usize>,
    pub restarts: usize,
    pub seed: u64,
}

/// Search settings for [`re_upper_bound_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReOptions {
    /// Random cone starting points, in addition to one eigenvector start per support.
    pub restarts: usize,
    /// Supports are enumerated exhaustively when there are at most this many.
    pub exhaustive_limit: u128,
    /// Supports sampled uniformly when enumeration is too large.
    pub sampled_supports: usize,
    /// Stop when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    pub max_steps: usize,
}

impl Default for ReOptions {
    fn default() -> Self {
        ReOptions { restarts: 200, exhaustive_limit: 2000, sampled_supports: 2000, grad_tol: 1e-9, max_steps: 500 }
    }
}

/// Upper bound on the RE constant with `restarts` random restarts.
pub fn re_upper_bound(x: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<REEstimate> {
    re_upper_bound_with(x, k, &ReOptions { restarts, ..ReOptions::default() }, seed)
}

/// Minimum Rayleigh quotient found over `∪_{|S|=k} C(S)`.
///
/// For each candidate support the bottom eigenvector of `X_SᵀX_S/n` (which
/// lies in `C(S)`) seeds a projected descent on the unit sphere; random cone
/// points on random candidate supports seed the remaining restarts, and the
/// bottom eigenvectors of the full Gram matrix are tried on their own top-k
/// supports. The
/// result therefore never exceeds `min_S λ_min(X_SᵀX_S/n)` over the visited
/// supports.
pub fn re_upper_bound_with(x: &DMatrix<f64>, k: usize, opts: &ReOptions, seed: u64) -> Result<REEstimate> {
    let d = x.ncols();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("cone size {k} outside 1..={d}")));
    }
    let g = gram(x);
    let mut r = rng(seed);
    let supports: Vec<Vec<usize>> = if binomial(d, k) <= opts.exhaustive_limit {
        (0..d).combinations(k).collect()
    } else {
        (0..opts.sampled_supports).map(|_| random_support(d, k, &mut r)).collect()
    };
    let descent = Descent::new(&g, opts);

    let mut best: Option<(f64, DVector<f64>, Vec<usize>)> = None;
    let consider =
        |value: f64, theta: DVector<f64>, s: &[usize], best: &mut Option<(f64, DVector<f64>, Vec<usize>)>| {
            if best.as_ref().map_or(true, |(v, _, _)| value < *v) {
                *best = Some((value, theta, s.to_vec()));
            }
        };
    for (support, start) in global_starts(&g, k) {
        let (theta, value) = descent.run(start, &mask(d, &support));
        consider(value, theta, &support, &mut best);
    }
    for support in &supports {
        let (_, vecs) = sym_eigen(&principal(&g, support));
        let mut start = DVector::zeros(d);
        for (i, &j) in support.iter().enumerate() {
            start[j] = vecs[(i, 0)];
        }
        let (theta, value) = descent.run(start, &mask(d, support));
        consider(value, theta, support, &mut best);
    }
    for _ in 0..opts.restarts {
        let s = r.gen_range(0..supports.len());
        let start = random_cone_point(d, &supports[s], &mut r);
        let (theta, value) = descent.run(start, &mask(d, &supports[s]));
        consider(value, theta, &supports[s], &mut best);
    }
    let (_, witness, witness_support) = best.expect("at least one support");
    // report the quotient of the returned witness itself
    let gamma_hat = rayleigh(x, &witness)?.max(0.0);
    Ok(REEstimate { gamma_hat, witness: witness.as_slice().to_vec(), witness_support, restarts: opts.restarts, seed })
}

fn mask(d: usize, support: &[usize]) -> Vec<bool> {
    let mut m = alloc::vec![false; d];
    for &j in support {
        m[j] = true;
    }
    m
}

/// Bottom eigenvectors of the full Gram matrix, projected onto the cone of
/// their own `k` largest entries and normalized.
fn global_starts(g: &DMatrix<f64>, k: usize) -> Vec<(Vec<usize>, DVector<f64>)> {
    let d = g.nrows();
    let (_, vecs) = sym_eigen(g);
    (0..d.min(2 * k))
        .filter_map(|e| {
            let mut start = vecs.column(e).into_owned();
            let support = top_support(&start, k);
            project_cone(&mut start, &mask(d, &support));
            (start.norm() > 0.0).then(|| (support, start.normalize()))
        })
        .collect()
}

/// Smallest `θᵀGθ/‖θ‖²` over the starting points [`re_upper_bound_with`]
/// uses deterministically: bottom eigenvectors of every `G_SS` in `supports`
/// and the projected global eigenvectors. Bounds the returned estimate from
/// above, since the descent never increases the quotient.
pub fn start_bound(g: &DMatrix<f64>, k: usize, supports: &[Vec<usize>]) -> f64 {
    let support_min = supports.iter().map(|s| lambda_min(&principal(g, s))).fold(f64::INFINITY, f64::min);
    global_starts(g, k).iter().map(|(_, v)| v.dot(&(g * v))).fold(support_min, f64::min)
}

fn top_support(v: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut s = idx[..k].to_vec();
    s.sort_unstable();
    s
}

fn random_support<R: Rng + ?Sized>(d: usize, k: usize, r: &mut R) -> Vec<usize> {
    let mut all: Vec<usize> = (0..d).collect();
    all.shuffle(r);
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

/// Gaussian entries on `S`, off-support mass scaled to a uniform fraction of
/// the cone budget. Returned with unit norm.
pub fn random_cone_point<R: Rng + ?Sized>(d: usize, support: &[usize], r: &mut R) -> DVector<f64> {
    let on_mask = mask(d, support);
    let mut theta = DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(r);
        z
    });
    let (mut on, mut off) = (0.0, 0.0);
    for j in 0..d {
        if on_mask[j] {
            on += theta[j].abs();
        } else {
            off += theta[j].abs();
        }
    }
    if off > 0.0 {
        let scale = r.gen::<f64>() * CONE_FACTOR * on / off;
        for j in 0..d {
            if !on_mask[j] {
                theta[j] *= scale;
            }
        }
    }
    let norm = theta.norm();
    if norm > 0.0 {
        theta /= norm;
    }
    theta
}

/// Euclidean projection onto the sign-fixed convex subcone
/// `{θ : ‖θ_S̄‖₁ ≤ 3·sᵀθ_S}` with `s = sign(θ_S)`, which lies inside `C(S)`.
///
/// The KKT conditions give `θ_S ← θ_S + 3μs` and `θ_S̄ ← soft(θ_S̄, μ)`; the
/// multiplier `μ ≥ 0` is found by bisection.
pub fn project_cone(theta: &mut DVector<f64>, on_mask: &[bool]) {
    let k = on_mask.iter().filter(|b| **b).count() as f64;
    let (mut on, mut off, mut off_max) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (j, v) in theta.iter().enumerate() {
        if on_mask[j] {
            on += v.abs();
        } else {
            off += v.abs();
            off_max = off_max.max(v.abs());
        }
    }
    if off <= CONE_FACTOR * on {
        return;
    }
    let excess = |mu: f64| -> f64 {
        let shrunk: f64 =
            theta.iter().enumerate().filter(|(j, _)| !on_mask[*j]).map(|(_, v)| (v.abs() - mu).max(0.0)).sum();
        shrunk - CONE_FACTOR * (on + CONE_FACTOR * k * mu)
    };
    let (mut lo, mut hi) = (0.0, off_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * off_max {
            break;
        }
    }
    let mu = hi;
    for (j, v) in theta.iter_mut().enumerate() {
        if on_mask[j] {
            let s = if *v < 0.0 { -1.0 } else { 1.0 };
            *v += CONE_FACTOR * mu * s;
        } else {
            *v = v.signum() * (v.abs() - mu).max(0.0);
        }
    }
    // bisection leaves at most rounding-level excess; remove it
    let (mut on, mut off) = (0.0, 0.0);
    for (j, v) in theta.iter().enumerate() {
        if on_mask[j] {
            on += v.abs();
        } else {
            off += v.abs();
        }
    }
    if off > CONE_FACTOR * on && off > 0.0 {
        let scale = CONE_FACTOR * on / off * (1.0 - 4.0 * f64::EPSILON);
        for (j, v) in theta.iter_mut().enumerate() {
            if !on_mask[j] {
                *v *= scale;
            }
        }
    }
}

/// Projected gradient descent of `θᵀGθ` on the unit sphere intersected with a cone.
struct Descent<'a> {
    g: &'a DMatrix<f64>,
    step0: f64,
    opts: ReOptions,
}

impl<'a> Descent<'a> {
    fn new(g: &'a DMatrix<f64>, opts: &ReOptions) -> Self {
        let top = lambda_max(g).max(f64::MIN_POSITIVE);
        Descent { g, step0: 0.5 / top, opts: *opts }
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        theta.dot(&(self.g * theta))
    }

    fn run(&self, mut theta: DVector<f64>, on_mask: &[bool]) -> (DVector<f64>, f64) {
        project_cone(&mut theta, on_mask);
        let norm = theta.norm();
        if norm == 0.0 {
            return (theta, f64::INFINITY);
        }
        theta /= norm;
        let mut value = self.value(&theta);
        let mut step = self.step0;
        for _ in 0..self.opts.max_steps {
            let grad = (self.g * &theta - &theta * value) * 2.0;
            let gnorm = grad.norm();
            if gnorm < self.opts.grad_tol {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = &theta - &grad * step;
                project_cone(&mut cand, on_mask);
                let cn = cand.norm();
                if cn > 0.0 {
                    cand /= cn;
                    let cv = self.value(&cand);
                    if cv < value {
                        let gain = value - cv;
                        theta = cand;
                        value = cv;
                        accepted = true;
                        step *= 2.0;
                        if gain <= 1e-15 * value.abs().max(1e-300) {
                            return (theta, value);
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (theta, value)
    }
}

/// Outcome of [`check_normalization`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub pass: bool,
    /// Largest `‖Xθ‖₂²/(n‖θ‖₂²)` seen over `2k`-sparse `θ`.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    Exact,
    Sampled,
}

/// Support enumerations above this many are refused in exact mode.
pub const EXACT_NORMALIZATION_BUDGET: u128 = 1_000_000;
/// Random sparse directions probed in sampled mode.
pub const NORMALIZATION_SAMPLES: usize = 10_000;
/// Slack on the comparison with 1 that absorbs eigen-solver rounding.
pub const NORMALIZATION_SLACK: f64 = 1e-12;

/// Checks `‖Xθ‖₂²/n ≤ ‖θ‖₂²` for all `θ` with at most `2k` nonzeros.
pub fn check_normalization(
    x: &DMatrix<f64>,
    k: usize,
    mode: NormalizationMode,
    seed: u64,
) -> Result<NormalizationCheck> {
    let d = x.ncols();
    if k == 0 {
        return Err(Error::InvalidParameter("sparsity must be >= 1".into()));
    }
    let s = (2 * k).min(d);
    let g = gram(x);
    let worst = match mode {
        NormalizationMode::Exact => {
            let needed = binomial(d, s);
            if needed > EXACT_NORMALIZATION_BUDGET {
                return Err(Error::BudgetExceeded { needed, budget: EXACT_NORMALIZATION_BUDGET });
            }
            (0..d).combinations(s).map(|sup| lambda_max(&principal(&g, &sup))).fold(f64::NEG_INFINITY, f64::max)
        }
        NormalizationMode::Sampled => {
            let mut r = rng(seed);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..NORMALIZATION_SAMPLES {
                let sup = random_support(d, s, &mut r);
                let mut theta = DVector::zeros(d);
                for &j in &sup {
                    theta[j] = StandardNormal.sample(&mut r);
                }
                if let Ok(q) = rayleigh(x, &theta) {
                    worst = worst.max(q);
                }
            }
            worst
        }
    };
    Ok(NormalizationCheck { pass: worst <= 1.0 + NORMALIZATION_SLACK, worst_ratio: worst })
}

/// A `(3k+1)`-sparse nonzero `θ` with `Xθ = 0`, searched over zero columns,
/// then the first `3k+1` nonzero columns, then sliding windows of `3k+1`
/// consecutive columns. `None` when every searched subset has full rank.
pub fn zero_re_certificate(x: &DMatrix<f64>, k: usize) -> Option<Vec<f64>> {
    let d = x.ncols();
    let width = (3 * k + 1).min(d);
    if width == 0 {
        return None;
    }
    let norms: Vec<f64> = (0..d).map(|j| x.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|v| *v == 0.0) {
        let mut theta = alloc::vec![0.0; d];
        theta[j] = 1.0;
        return Some(theta);
    }
    let nonzero: Vec<usize> = (0..d).filter(|&j| norms[j] > 0.0).collect();
    let mut windows: Vec<Vec<usize>> = Vec::new();
    if nonzero.len() >= width {
        windows.push(nonzero[..width].to_vec());
    }
    for start in 0..=(d - width) {
        windows.push((start..start + width).collect());
    }
    windows.into_iter().find_map(|cols| kernel_vector(x, &cols))
}

fn kernel_vector(x: &DMatrix<f64>, cols: &[usize]) -> Option<Vec<f64>> {
    let w = cols.len();
    let n = x.nrows();
    // pad with zero rows so the SVD exposes all w right singular vectors
    let rows = n.max(w);
    let sub = DMatrix::from_fn(rows, w, |i, j| if i < n { x[(i, cols[j])] } else { 0.0 });
    let svd = sub.clone().svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let (idx, smallest) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let scale = svd.singular_values.max().max(1.0);
    if *smallest > 1e-10 * scale {
        return None;
    }
    let v = v_t.row(idx);
    let mut theta = alloc::vec![0.0; x.ncols()];
    for (i, &j) in cols.iter().enumerate() {
        theta[j] = v[i];
    }
    let t = DVector::from_column_slice(&theta);
    if (x * &t).norm() <= 1e-10 * scale * t.norm() {
        Some(theta)
    } else {
        None
    }
}

/// Per-trial pass rates of the Gaussian singular-value bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundTrial {
    /// Fraction of random `2k`-sparse `θ` with `‖Aθ‖₂/√n ≤ 3‖θ‖₂`.
    pub upper_pass_rate: f64,
    /// Fraction of random cone vectors with `‖Aθ‖₂/√n ≥ ‖θ‖₂/8`.
    pub lower_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundReport {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub samples_per_trial: usize,
    pub seed: u64,
    pub trials: Vec<GaussianBoundTrial>,
}

impl GaussianBoundReport {
    /// Trials in which both pass rates reach `rate`.
    pub fn passing_trials(&self, rate: f64) -> usize {
        self.trials.iter().filter(|t| t.upper_pass_rate >= rate && t.lower_pass_rate >= rate).count()
    }
}

/// Samples of each bound per trial.
pub const GAUSSIAN_SUITE_SAMPLES: usize = 1000;

/// Monte-Carlo check of the singular-value bounds for i.i.d. `N(0, 1)` designs.
pub fn gaussian_bound_suite(n: usize, d: usize, k: usize, trials: usize, seed: u64) -> Result<GaussianBoundReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("sparsity must be >= 1".into()));
    }
    if 2 * k > d || 2 * k > n {
        return Err(Error::InvalidParameter(format!("need 2k <= min(n, d); got n={n}, d={d}, k={k}")));
    }
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut r = rng(crate::seed::derive_seed(seed, trial as u64));
        let a = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r));
        let scale = 1.0 / libm::sqrt(n as f64);
        let mut upper = 0usize;
        for _ in 0..GAUSSIAN_SUITE_SAMPLES {
            let sup = random_support(d, 2 * k, &mut r);
            let mut theta = DVector::zeros(d);
            for &j in &sup {
                theta[j] = StandardNormal.sample(&mut r);
            }
            if (&a * &theta).norm() * scale <= 3.0 * theta.norm() {
                upper += 1;
            }
        }
        let mut lower = 0usize;
        for _ in 0..GAUSSIAN_SUITE_SAMPLES {
            let sup = random_support(d, k, &mut r);
            let theta = random_cone_point(d, &sup, &mut r);
            if (&a * &theta).norm() * scale >= theta.norm() / 8.0 {
                lower += 1;
            }
        }
        out.push(GaussianBoundTrial {
            upper_pass_rate: upper as f64 / GAUSSIAN_SUITE_SAMPLES as f64,
            lower_pass_rate: lower as f64 / GAUSSIAN_SUITE_SAMPLES as f64,
        });
    }
    Ok(GaussianBoundReport { n, d, k, samples_per_trial: GAUSSIAN_SUITE_SAMPLES, seed, trials: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lambda_min;
    use alloc::vec;

    fn scaled_identity(n: usize, c: f64) -> DMatrix<f64> {
        DMatrix::identity(n, n) * (c * libm::sqrt(n as f64))
    }

    #[test]
    fn cone_membership() {
        let spec = ConeSpec::new(vec![0, 2]);
        assert!(in_cone(&[1.0, 0.0, -2.0, 0.0], &spec));
        assert!(!in_cone(&[0.0, 1.0, 0.0, 0.0], &spec));
        assert!(in_cone(&[1.0, 6.0, -1.0, 0.0], &spec));
        assert!(!in_cone(&[1.0, 6.0, -1.0, 1e-9], &spec));
        assert_eq!(spec.factor(), 3.0);
    }

    #[test]
    fn rayleigh_examples() {
        let x = scaled_identity(4, 1.0);
        let theta = DVector::from_vec(vec![0.2, -1.0, 3.0, 0.0]);
        assert!((rayleigh(&x, &theta).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(rayleigh(&DMatrix::zeros(3, 4), &theta).unwrap(), 0.0);
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])) * libm::sqrt(2.0);
        assert!((rayleigh(&x, &DVector::from_vec(vec![0.0, 1.0])).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(rayleigh(&x, &DVector::zeros(2)), Err(Error::ZeroVector));
    }

    #[test]
    fn projection_lands_in_cone() {
        let mut r = rng(4);
        for _ in 0..200 {
            let d = 8;
            let sup = random_support(d, 2, &mut r);
            let m = mask(d, &sup);
            let mut theta = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r));
            let before = theta.clone();
            project_cone(&mut theta, &m);
            assert!(in_cone(theta.as_slice(), &ConeSpec::new(sup.clone())));
            // already-feasible points are untouched
            let mut again = theta.clone();
            project_cone(&mut again, &m);
            assert_eq!(again, theta);
            assert!((&theta - &before).norm() <= before.norm());
        }
    }

    #[test]
    fn identity_has_unit_re() {
        let x = scaled_identity(6, 1.0);
        let est = re_upper_bound(&x, 2, 20, 1).unwrap();
        assert!((est.gamma_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_has_zero_re() {
        let mut r = rng(8);
        let mut x = DMatrix::from_fn(20, 6, |_, _| StandardNormal.sample(&mut r));
        let c = x.column(1).into_owned();
        x.set_column(4, &c);
        let est = re_upper_bound(&x, 1, 20, 2).unwrap();
        assert!(est.gamma_hat < 1e-12, "{}", est.gamma_hat);
        let cert = zero_re_certificate(&x, 1).unwrap();
        assert!(cert[1].abs() > 0.5 && (cert[1] + cert[4]).abs() < 1e-10);
        assert_eq!(cert.iter().filter(|v| v.abs() > 1e-12).count(), 2);
    }

    #[test]
    fn estimate_invariants() {
        let mut r = rng(12);
        let x = DMatrix::from_fn(15, 8, |_, _| StandardNormal.sample(&mut r));
        let est = re_upper_bound(&x, 2, 50, 9).unwrap();
        assert!(in_cone(&est.witness, &ConeSpec::new(est.witness_support.clone())));
        let w = DVector::from_column_slice(&est.witness);
        assert!((rayleigh(&x, &w).unwrap() - est.gamma_hat).abs() < 1e-9);
        let g = gram(&x);
        assert!(lambda_min(&g) <= est.gamma_hat + 1e-12);
        let support_min = (0..8).combinations(2).map(|s| lambda_min(&principal(&g, &s))).fold(f64::INFINITY, f64::min);
        assert!(est.gamma_hat <= support_min + 1e-12);
        assert_eq!(re_upper_bound(&x, 2, 50, 9).unwrap(), est);
    }

    #[test]
    fn certificate_absent_for_identity() {
        assert_eq!(zero_re_certificate(&scaled_identity(5, 1.0), 1), None);
    }

    #[test]
    fn normalization_examples() {
        let c = check_normalization(&scaled_identity(6, 1.0), 2, NormalizationMode::Exact, 0).unwrap();
        assert!(c.pass && (c.worst_ratio - 1.0).abs() < 1e-12);
        let c = check_normalization(&scaled_identity(6, 2.0), 2, NormalizationMode::Exact, 0).unwrap();
        assert!(!c.pass && (c.worst_ratio - 4.0).abs() < 1e-12);
        let c = check_normalization(&scaled_identity(6, 2.0), 1, NormalizationMode::Sampled, 3).unwrap();
        assert!(!c.pass && (c.worst_ratio - 4.0).abs() < 1e-12);
        let big = DMatrix::zeros(2, 60);
        assert!(matches!(
            check_normalization(&big, 10, NormalizationMode::Exact, 0),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn gaussian_suite_rejects_zero_sparsity() {
        assert!(matches!(gaussian_bound_suite(10, 5, 0, 1, 0), Err(Error::InvalidParameter(_))));
    }
}
