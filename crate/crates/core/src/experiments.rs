//! Monte-Carlo prediction-risk experiments on hard designs.
//!
//! The regression vectors used here are built from planted exact covers:
//! each of the `t` segments of `θ*` is `ρ` times the binary encoding of a
//! uniformly chosen exact cover of a random planted collection. This is a
//! concrete stand-in for the hard distribution of the lower-bound argument,
//! which has no constructive form; nothing here claims to reproduce its
//! constants.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorKind, RegressionProblem, SparseEstimator};
use crate::hard_design::{build_hard_design, quantize, GammaCeiling, HardDesign, HardDesignParams};
use crate::seed::{derive_seed, label, rng};
use crate::x3c::{all_exact_covers, encode_cover, ExactCover, X3CInstance};
use crate::{Error, Result, DEFAULT_BUDGET};

/// Notice attached to every report produced from planted-cover vectors.
pub const SUBSTITUTE_DISTRIBUTION_NOTICE: &str =
    "regression vectors are drawn uniformly from encodings of planted exact \
covers; this substitutes for the non-constructive hard distribution and does not reproduce the lower bound's constants";

/// Density of extra (non-planted) triples in sampled collections.
pub const PLANTED_EXTRA_DENSITY: f64 = 0.25;

/// Scale parameters tying the signal size to the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub r: f64,
    pub rho: f64,
    pub t: usize,
    pub k: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub n: usize,
    pub l: u32,
}

/// `r = σt / (400γ√n(k+t))` and `ρ = ⌊r/√(m/3 + p)⌋_l`.
pub fn reduction_params_for(m: usize, t: usize, n: usize, l: u32, gamma: f64, sigma: f64) -> Result<ReductionParams> {
    if !(sigma > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("need sigma > 0 and gamma > 0, got {sigma}, {gamma}")));
    }
    if m < 3 || m % 3 != 0 {
        return Err(Error::InvalidGroundSet(m));
    }
    let block = m / 3 + crate::linalg::binomial(m, 3) as usize;
    let k = t * block;
    let r = sigma * t as f64 / (400.0 * gamma * libm::sqrt(n as f64) * (k + t) as f64);
    let rho = quantize(r / libm::sqrt(block as f64), l);
    Ok(ReductionParams { r, rho, t, k, sigma, gamma, n, l })
}

pub fn reduction_params(design: &HardDesign, sigma: f64) -> Result<ReductionParams> {
    let p = &design.params;
    reduction_params_for(p.m, p.t, p.n, p.l, p.gamma_target, sigma)
}

/// A sampled regression vector with the covers it encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaStarSpec {
    pub theta: Vec<f64>,
    pub rho: f64,
    /// Segment `i` encodes `covers[i]` of `instances[i]`.
    pub instances: Vec<X3CInstance>,
    pub covers: Vec<ExactCover>,
    pub seed: u64,
}

impl ThetaStarSpec {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }
}

/// Coordinates of segment `i` (0-based): `4p·i .. 4p·(i+1)`.
pub fn segment_range(p: usize, i: usize) -> core::ops::Range<usize> {
    4 * p * i..4 * p * (i + 1)
}

/// Draws `θ*` segment by segment from planted-cover encodings scaled by `rho`.
pub fn sample_theta_star(design: &HardDesign, rho: f64, seed: u64) -> Result<ThetaStarSpec> {
    let params = &design.params;
    let (m, t, p) = (params.m, params.t, params.p());
    let mut theta = alloc::vec![0.0; design.d()];
    let mut instances = Vec::with_capacity(t);
    let mut covers = Vec::with_capacity(t);
    for i in 0..t {
        let mut r = rng(derive_seed(seed, i as u64));
        let inst = X3CInstance::random(m, PLANTED_EXTRA_DENSITY, true, &mut r)?;
        let all = all_exact_covers(&inst, DEFAULT_BUDGET)?;
        let cover = all[r.gen_range(0..all.len())].clone();
        let u = encode_cover(&inst, &cover)?;
        for (offset, bit) in u.bits.iter().enumerate() {
            if *bit {
                theta[segment_range(p, i).start + offset] = rho;
            }
        }
        instances.push(inst);
        covers.push(cover);
    }
    Ok(ThetaStarSpec { theta, rho, instances, covers, seed })
}

/// `y = Xθ* + w` for one trial; the noise seed is `derive_seed(seed, trial)`.
pub fn trial_problem(
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    sigma: f64,
    k: usize,
    seed: u64,
    trial: u64,
) -> Result<RegressionProblem> {
    let mut r = rng(derive_seed(seed, trial));
    let noise = DVector::from_fn(x.nrows(), |_, _| {
        sigma * {
            let z: f64 = StandardNormal.sample(&mut r);
            z
        }
    });
    RegressionProblem::new(x.clone(), x * theta_star + noise, sigma, k)
}

pub fn trial_mse(
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    sigma: f64,
    k: usize,
    estimator: EstimatorKind,
    seed: u64,
    trial: u64,
) -> Result<TrialOutcome> {
    let n = x.nrows();
    let signal = x * theta_star;
    let prob = trial_problem(x, theta_star, sigma, k, seed, trial)?;
    let (est, converged) = match estimator.estimate(&prob) {
        Ok(e) => (e, true),
        Err(Error::NonConverged { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    let mse = (x * est.vector() - signal).norm_squared() / n as f64;
    Ok(TrialOutcome { mse, converged })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub mse: f64,
    pub converged: bool,
}

/// Sample mean and standard deviation of the per-trial prediction MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std: f64,
    pub trials: usize,
    /// Trials whose estimator stopped without a certificate; their best
    /// iterate is included in the statistics.
    pub nonconverged: usize,
}

pub fn summarize(mses: &[f64]) -> (f64, f64) {
    let n = mses.len() as f64;
    let mean = mses.iter().sum::<f64>() / n;
    if mses.len() < 2 {
        return (mean, 0.0);
    }
    let var = mses.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Monte-Carlo estimate of `E[(1/n)‖Xθ̂ − Xθ*‖₂²]` over `w ~ N(0, σ²I)`.
pub fn simulate_mse(
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    sigma: f64,
    k: usize,
    estimator: EstimatorKind,
    trials: usize,
    seed: u64,
) -> Result<MseSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if theta_star.len() != x.ncols() {
        return Err(Error::ShapeError(format!(
            "theta* has length {}, design has {} columns",
            theta_star.len(),
            x.ncols()
        )));
    }
    let mut mses = Vec::with_capacity(trials);
    let mut nonconverged = 0;
    for trial in 0..trials {
        let out = trial_mse(x, theta_star, sigma, k, estimator, seed, trial as u64)?;
        if !out.converged {
            nonconverged += 1;
        }
        mses.push(out.mse);
    }
    let (mean, std) = summarize(&mses);
    Ok(MseSummary { mean, std, trials, nonconverged })
}

/// Source of wall-clock readings for report timings.
pub trait Clock {
    fn now_s(&self) -> f64;
}

/// A clock that always reads zero; reports built with it are bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_s(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub m: usize,
    pub t: usize,
    pub n: usize,
    pub d: usize,
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub l: u32,
    pub epsilon_bar: f64,
    /// Sampled regression vectors; the reported row is the worst of them.
    pub theta_samples: usize,
}

impl GapConfig {
    pub fn new(m: usize, t: usize, n: usize, d: usize, gammas: Vec<f64>, sigma: f64, trials: usize, seed: u64) -> Self {
        GapConfig { m, t, n, d, gammas, sigma, trials, seed, l: 30, epsilon_bar: 1e-6, theta_samples: 5 }
    }

    pub fn design_params(&self, gamma: f64, seed: u64) -> HardDesignParams {
        HardDesignParams {
            m: self.m,
            t: self.t,
            n: self.n,
            d: self.d,
            gamma_target: gamma,
            l: self.l,
            epsilon_bar: self.epsilon_bar,
            seed,
            ceiling: GammaCeiling::Empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub gamma: f64,
    pub estimator: String,
    pub trials: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    /// Noise seed; sampled vector `s` uses `derive_seed(seed, s)`.
    pub seed: u64,
    pub runtime_s: f64,
}

/// Per-`γ` construction details and reference bound curves (constant 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSummary {
    pub gamma: f64,
    pub gamma_hat: f64,
    pub x_calibrated: f64,
    pub design_seed: u64,
    pub r: f64,
    pub rho: f64,
    /// `σ²k log d / n`.
    pub l0_bound: f64,
    /// `σ²k log d / (γ̂² n)`.
    pub lasso_bound: f64,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: GapConfig,
    pub rows: Vec<ExperimentRow>,
    pub gammas: Vec<GammaSummary>,
    pub notice: String,
}

impl ExperimentReport {
    pub fn row(&self, gamma: f64, estimator: EstimatorKind) -> Option<&ExperimentRow> {
        self.rows.iter().find(|r| r.gamma == gamma && r.estimator == estimator.name())
    }

    /// Sorts rows by `(gamma, estimator)` and rejects duplicate keys.
    pub fn normalize(&mut self) -> Result<()> {
        self.rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then_with(|| a.estimator.cmp(&b.estimator)));
        if self.rows.windows(2).any(|w| w[0].gamma == w[1].gamma && w[0].estimator == w[1].estimator) {
            return Err(Error::InvalidParameter("duplicate (gamma, estimator) rows".into()));
        }
        self.gammas.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        Ok(())
    }
}

/// Estimators contrasted by the gap experiment.
pub const GAP_ESTIMATORS: [EstimatorKind; 2] = [EstimatorKind::L0, EstimatorKind::ThresholdedLasso];

/// For each `γ`: build a hard design, sample regression vectors, and
/// estimate the prediction MSE of the `l0` and thresholded-Lasso estimators.
pub fn gap_experiment(config: &GapConfig, clock: &dyn Clock) -> Result<ExperimentReport> {
    gap_experiment_with(config, clock, |_, _| {})
}

/// [`gap_experiment`] with a hook receiving each design and its sampled vectors.
pub fn gap_experiment_with(
    config: &GapConfig,
    clock: &dyn Clock,
    mut inspect: impl FnMut(&HardDesign, &[ThetaStarSpec]),
) -> Result<ExperimentReport> {
    if config.trials == 0 || config.theta_samples == 0 {
        return Err(Error::InvalidParameter("trials and theta_samples must be >= 1".into()));
    }
    if !(config.sigma > 0.0) {
        return Err(Error::InvalidParameter("sigma must be > 0".into()));
    }
    let mut rows = Vec::new();
    let mut gammas = Vec::new();
    for &gamma in &config.gammas {
        // keyed by value so a γ's rows do not depend on the rest of the list
        let gamma_seed = derive_seed(config.seed, gamma.to_bits());
        let params = config.design_params(gamma, derive_seed(gamma_seed, label("design")));
        let k = params.k();
        let budget_needed = crate::linalg::binomial(config.d, k);
        if budget_needed > DEFAULT_BUDGET {
            return Err(Error::BudgetExceeded { needed: budget_needed, budget: DEFAULT_BUDGET });
        }
        let design = build_hard_design(&params)?;
        let red = reduction_params(&design, config.sigma)?;
        let thetas: Vec<ThetaStarSpec> = (0..config.theta_samples)
            .map(|s| {
                sample_theta_star(&design, red.rho, derive_seed(derive_seed(gamma_seed, label("theta")), s as u64))
            })
            .collect::<Result<_>>()?;
        inspect(&design, &thetas);

        let mut nonconverged = 0;
        for estimator in GAP_ESTIMATORS {
            let noise_seed = derive_seed(gamma_seed, label(estimator.name()));
            let start = clock.now_s();
            let mut worst: Option<MseSummary> = None;
            for (s, theta) in thetas.iter().enumerate() {
                let summary = simulate_mse(
                    &design.x,
                    &theta.vector(),
                    config.sigma,
                    k,
                    estimator,
                    config.trials,
                    derive_seed(noise_seed, s as u64),
                )?;
                nonconverged += summary.nonconverged;
                if worst.map_or(true, |w| summary.mean > w.mean) {
                    worst = Some(summary);
                }
            }
            let worst = worst.expect("theta_samples >= 1");
            rows.push(ExperimentRow {
                gamma,
                estimator: String::from(estimator.name()),
                trials: config.trials,
                mse_mean: worst.mean,
                mse_std: worst.std,
                seed: noise_seed,
                runtime_s: clock.now_s() - start,
            });
        }
        let base = config.sigma * config.sigma * k as f64 * libm::log(config.d as f64) / config.n as f64;
        gammas.push(GammaSummary {
            gamma,
            gamma_hat: design.gamma_hat,
            x_calibrated: design.x_calibrated,
            design_seed: design.seed_used,
            r: red.r,
            rho: red.rho,
            l0_bound: base,
            lasso_bound: base / (design.gamma_hat * design.gamma_hat),
            nonconverged,
        });
    }
    let mut report =
        ExperimentReport { config: config.clone(), rows, gammas, notice: String::from(SUBSTITUTE_DISTRIBUTION_NOTICE) };
    report.normalize()?;
    Ok(report)
}

/// `θ̄`: a copy of `advice` whose segment `i` is replaced by `replacement`.
pub fn replace_segment(advice: &[f64], p: usize, i: usize, replacement: &[f64]) -> Result<Vec<f64>> {
    let range = segment_range(p, i);
    if range.end > advice.len() || replacement.len() != 4 * p {
        return Err(Error::ShapeError(format!("segment {i} of width {} does not fit", 4 * p)));
    }
    let mut out = advice.to_vec();
    out[range].copy_from_slice(replacement);
    Ok(out)
}

/// `y′ = [X↑θ̄; X↓θ̃] + w` with `w ~ N(0, σ²I)` from `seed`.
///
/// `theta_bar` must agree with `theta_tilde` outside segment `segment`
/// (0-based), padding coordinates included.
pub fn build_pprime_response(
    design: &HardDesign,
    theta_bar: &[f64],
    theta_tilde: &[f64],
    sigma: f64,
    segment: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    let (n, d) = design.x.shape();
    let p = design.params.p();
    if theta_bar.len() != d || theta_tilde.len() != d {
        return Err(Error::ShapeError(format!("vectors must have length {d}")));
    }
    if segment >= design.params.t {
        return Err(Error::InvalidAdvice(format!("segment {segment} outside 0..{}", design.params.t)));
    }
    let range = segment_range(p, segment);
    if let Some(j) = (0..d).find(|j| !range.contains(j) && theta_bar[*j] != theta_tilde[*j]) {
        return Err(Error::InvalidAdvice(format!("vectors differ at coordinate {j} outside segment {segment}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be >= 0")));
    }
    let bar = DVector::from_column_slice(theta_bar);
    let tilde = DVector::from_column_slice(theta_tilde);
    let top = design.x.rows(0, n / 2) * bar;
    let bottom = design.x.rows(n / 2, n - n / 2) * tilde;
    let mut r = rng(seed);
    Ok(DVector::from_fn(n, |i, _| {
        let base = if i < n / 2 { top[i] } else { bottom[i - n / 2] };
        base + sigma * {
            let z: f64 = StandardNormal.sample(&mut r);
            z
        }
    }))
}
