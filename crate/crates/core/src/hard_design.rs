//! Construction of quantized, ill-conditioned designs with a prescribed RE
//! constant.
//!
//! The cover matrix is replicated `t` times on the diagonal (scaled by
//! `√t`) to form `A_k`, halved and zero-padded to width `d` to form `B_k`.
//! The design family `C_x` stacks `n/(6k)` copies of `B_k` over a Gaussian
//! block `x·R`; `x` is found by bisection so that the estimated RE constant
//! hits the target, then every entry is quantized to the grid `2^{-l}ℤ`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use itertools::Itertools;

use crate::linalg::{binomial, gram};
use crate::re_cond::{
    check_normalization, re_upper_bound_with, start_bound, NormalizationCheck, NormalizationMode, ReOptions,
    EXACT_NORMALIZATION_BUDGET,
};
use crate::seed::{derive_seed, label, rng};
use crate::x3c::{build_cover_matrix, CoverMatrix};
use crate::{Error, Result};

/// Upper end `1/(24√2)` of the RE range covered by the existence argument.
pub const THEORY_GAMMA_CEILING: f64 = 0.029_462_782_549_439_48;
/// Relative calibration tolerance on the achieved RE estimate.
pub const CALIBRATION_REL_TOL: f64 = 0.05;
pub const CALIBRATION_MAX_STEPS: usize = 60;
/// Fresh Gaussian blocks tried before calibration gives up.
pub const CALIBRATION_ATTEMPTS: u64 = 5;
/// Calibrated seeds tried before construction gives up.
pub const CONSTRUCTION_ATTEMPTS: u64 = 3;
/// Candidate seeds screened before construction gives up.
pub const SCREEN_CANDIDATES: u64 = 256;
/// Allowance for the heuristic RE search when comparing two estimates.
pub const DESCENT_SLACK: f64 = 1e-6;

/// `⌊x⌋_l = 2^{-l}·floor(2^l·x)`.
pub fn quantize(x: f64, l: u32) -> f64 {
    let scale = libm::ldexp(1.0, l as i32);
    libm::floor(x * scale) / scale
}

/// Which upper limit applies to the target RE constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaCeiling {
    /// `γ < 1/(24√2)`, where normalization follows from the constants alone.
    Theoretical,
    /// `γ < 1`; normalization rests on the exact certificate of the built design.
    Empirical,
}

impl GammaCeiling {
    pub fn value(self) -> f64 {
        match self {
            GammaCeiling::Theoretical => THEORY_GAMMA_CEILING,
            GammaCeiling::Empirical => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardDesignParams {
    /// Ground-set size of the underlying cover matrix.
    pub m: usize,
    /// Number of diagonal replicas.
    pub t: usize,
    pub n: usize,
    pub d: usize,
    pub gamma_target: f64,
    /// Quantization level: entries land on multiples of `2^{-l}`.
    pub l: u32,
    /// Required accuracy scale; bounds `l` from below.
    pub epsilon_bar: f64,
    pub seed: u64,
    pub ceiling: GammaCeiling,
}

impl HardDesignParams {
    pub fn p(&self) -> usize {
        binomial(self.m, 3) as usize
    }

    /// `k = t(m/3 + p)`.
    pub fn k(&self) -> usize {
        self.t * (self.m / 3 + self.p())
    }

    /// `ceil(max{log₂(12√d), log₂(√(nd)/ε̄)})`.
    pub fn min_level(&self) -> u32 {
        let a = libm::log2(12.0 * libm::sqrt(self.d as f64));
        let b = libm::log2(libm::sqrt((self.n * self.d) as f64) / self.epsilon_bar);
        libm::ceil(a.max(b)).max(0.0) as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 || self.m % 3 != 0 {
            return Err(Error::InvalidGroundSet(self.m));
        }
        if self.t == 0 {
            return Err(Error::InvalidParameter("t must be >= 1".into()));
        }
        let k = self.k();
        if self.d < 4 * k {
            return Err(Error::ShapeError(format!("d = {} is below 4k = {}", self.d, 4 * k)));
        }
        if self.n == 0 || self.n % (6 * k) != 0 {
            return Err(Error::ShapeError(format!("n = {} is not a positive multiple of 6k = {}", self.n, 6 * k)));
        }
        if !(self.epsilon_bar > 0.0 && self.epsilon_bar < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon_bar {} outside (0, 1)", self.epsilon_bar)));
        }
        let ceiling = self.ceiling.value();
        if !(self.gamma_target > self.epsilon_bar && self.gamma_target < ceiling) {
            return Err(Error::InvalidParameter(format!(
                "gamma_target {} outside ({}, {ceiling})",
                self.gamma_target, self.epsilon_bar
            )));
        }
        let required = self.min_level();
        if self.l < required {
            return Err(Error::PrecisionTooCoarse { l: self.l, required });
        }
        if self.l > 1000 {
            return Err(Error::InvalidParameter(format!("quantization level {} is too fine for f64", self.l)));
        }
        Ok(())
    }
}

/// `blkdiag(√t·M, …, √t·M)` with `t` blocks.
pub fn build_ak(cover: &CoverMatrix, t: usize) -> DMatrix<f64> {
    let m = cover.matrix();
    let (r, c) = m.shape();
    let scale = libm::sqrt(t as f64);
    let mut out = DMatrix::zeros(r * t, c * t);
    for b in 0..t {
        out.view_mut((b * r, b * c), (r, c)).copy_from(&(m * scale));
    }
    out
}

/// `½[A_k 0]` padded to `d` columns.
pub fn build_bk(ak: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let (r, c) = ak.shape();
    if d < c {
        return Err(Error::ShapeError(format!("d = {d} is narrower than A_k ({c} columns)")));
    }
    let mut out = DMatrix::zeros(r, d);
    out.view_mut((0, 0), (r, c)).copy_from(&(ak * 0.5));
    Ok(out)
}

/// The `n/2 × d` standard Gaussian block `R`.
pub fn gaussian_block(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    // fill row by row so the stream layout is independent of storage order
    let mut out = DMatrix::zeros(n / 2, d);
    for i in 0..n / 2 {
        for j in 0..d {
            out[(i, j)] = StandardNormal.sample(&mut r);
        }
    }
    out
}

/// `C_x`: `n/(6k)` copies of `B_k` on top of `x·R`.
pub fn build_cx_with(bk: &DMatrix<f64>, n: usize, x: f64, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, d) = bk.shape();
    if rows == 0 || n % (2 * rows) != 0 {
        return Err(Error::ShapeError(format!("n = {n} is not a multiple of 2·{rows}")));
    }
    if r.shape() != (n / 2, d) {
        return Err(Error::ShapeError(format!("Gaussian block is {:?}, expected ({}, {d})", r.shape(), n / 2)));
    }
    let mut out = DMatrix::zeros(n, d);
    for c in 0..n / (2 * rows) {
        out.view_mut((c * rows, 0), (rows, d)).copy_from(bk);
    }
    out.view_mut((n / 2, 0), (n / 2, d)).copy_from(&(r * x));
    Ok(out)
}

/// `C_x` with the Gaussian block drawn from `params.seed`.
pub fn build_cx(bk: &DMatrix<f64>, params: &HardDesignParams, x: f64) -> Result<DMatrix<f64>> {
    if params.n % (6 * params.k()) != 0 {
        return Err(Error::ShapeError(format!("n = {} is not a multiple of 6k = {}", params.n, 6 * params.k())));
    }
    let r = gaussian_block(params.n, params.d, gaussian_seed(params.seed, 0));
    build_cx_with(bk, params.n, x, &r)
}

fn gaussian_seed(seed: u64, attempt: u64) -> u64 {
    derive_seed(derive_seed(seed, label("gaussian-block")), attempt)
}

fn re_seed(seed: u64) -> u64 {
    derive_seed(seed, label("re-estimate"))
}

/// One evaluation of the RE estimate during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub x: f64,
    pub gamma_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub x: f64,
    pub gamma_hat: f64,
    /// Seed of the Gaussian block that was used.
    pub r_seed: u64,
    pub trace: Vec<CalibrationStep>,
}

/// The `B_k` block for `params`.
pub fn top_block(params: &HardDesignParams) -> Result<DMatrix<f64>> {
    let cover = build_cover_matrix(params.m)?;
    build_bk(&build_ak(&cover, params.t), params.d)
}

/// Bisection on `x` until the RE estimate of `C_x` is within 5% of the target.
///
/// The bracket starts at `[0, 8√2·γ]`. When the estimate at the top end is
/// still below the target the top is doubled, up to `8√2·√γ` (where the
/// Gaussian lower bound alone yields `γ`); a fresh Gaussian block is drawn if
/// even that fails. Estimates inconsistent with the bracket are re-estimated
/// with a different seed and twice the restarts, keeping the smaller upper
/// bound.
pub fn calibrate_x(params: &HardDesignParams) -> Result<Calibration> {
    calibrate_x_with(params, &ReOptions::default())
}

pub fn calibrate_x_with(params: &HardDesignParams, opts: &ReOptions) -> Result<Calibration> {
    params.validate()?;
    let bk = top_block(params)?;
    let (n, d, k) = (params.n, params.d, params.k());
    let target = params.gamma_target;
    let tol = CALIBRATION_REL_TOL * target;
    let seed = re_seed(params.seed);
    let tau = 8.0 * core::f64::consts::SQRT_2 * target;
    let tau_cap = 8.0 * core::f64::consts::SQRT_2 * libm::sqrt(target);

    for attempt in 0..CALIBRATION_ATTEMPTS {
        let r_seed = gaussian_seed(params.seed, attempt);
        let r = gaussian_block(n, d, r_seed);
        let mut trace = Vec::new();
        let eval = |x: f64, trace: &mut Vec<CalibrationStep>, retry: bool| -> Result<f64> {
            let cx = build_cx_with(&bk, n, x, &r)?;
            let mut g = re_upper_bound_with(&cx, k, opts, seed)?.gamma_hat;
            if retry {
                let wider = ReOptions { restarts: opts.restarts * 2, ..*opts };
                g = g.min(re_upper_bound_with(&cx, k, &wider, derive_seed(seed, 1))?.gamma_hat);
            }
            trace.push(CalibrationStep { x, gamma_hat: g });
            Ok(g)
        };
        let done = |x: f64, g: f64, trace: Vec<CalibrationStep>| Calibration { x, gamma_hat: g, r_seed, trace };

        let g_lo0 = eval(0.0, &mut trace, false)?;
        if (g_lo0 - target).abs() <= tol {
            return Ok(done(0.0, g_lo0, trace));
        }
        let mut hi = tau;
        let mut g_hi = eval(hi, &mut trace, false)?;
        while g_hi < target && hi < tau_cap {
            hi = (hi * 2.0).min(tau_cap);
            g_hi = eval(hi, &mut trace, false)?;
        }
        if g_hi < target {
            continue;
        }
        if (g_hi - target).abs() <= tol {
            return Ok(done(hi, g_hi, trace));
        }
        let (mut lo, mut g_lo) = (0.0, g_lo0);
        for _ in 0..CALIBRATION_MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            let mut g = eval(mid, &mut trace, false)?;
            if g < g_lo || g > g_hi {
                trace.pop();
                g = eval(mid, &mut trace, true)?;
            }
            if (g - target).abs() <= tol {
                return Ok(done(mid, g, trace));
            }
            if g < target {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
                g_hi = g;
            }
        }
        let closest = *trace
            .iter()
            .min_by(|a, b| (a.gamma_hat - target).abs().total_cmp(&(b.gamma_hat - target).abs()))
            .expect("non-empty trace");
        return Ok(done(closest.x, closest.gamma_hat, trace));
    }
    Err(Error::CalibrationFailed(format!(
        "RE estimate stayed below {target} at x = {tau_cap} for {CALIBRATION_ATTEMPTS} Gaussian blocks"
    )))
}

/// A quantized calibrated design with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct HardDesign {
    pub x: DMatrix<f64>,
    /// Parameters as requested; `seed_used` differs from `params.seed` after a retry.
    pub params: HardDesignParams,
    pub seed_used: u64,
    pub x_calibrated: f64,
    /// RE estimate of the quantized design.
    pub gamma_hat: f64,
    pub gamma_hat_unquantized: f64,
    pub r_seed: u64,
    pub trace: Vec<CalibrationStep>,
    pub normalization: NormalizationCheck,
}

impl HardDesign {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Top `n/2` rows.
    pub fn upper(&self) -> DMatrix<f64> {
        self.x.rows(0, self.n() / 2).into_owned()
    }

    /// Bottom `n/2` rows.
    pub fn lower(&self) -> DMatrix<f64> {
        self.x.rows(self.n() / 2, self.n() / 2).into_owned()
    }
}

/// Bound on the RE change caused by quantization at level `l`:
/// `‖⌊C⌋_l − C‖_F / √n ≤ 2^{-l}√(nd)/√n`.
pub fn quantization_bound(n: usize, d: usize, l: u32) -> f64 {
    libm::ldexp(1.0, -(l as i32)) * libm::sqrt((n * d) as f64) / libm::sqrt(n as f64)
}

/// Calibrates, quantizes and certifies a design.
pub fn build_hard_design(params: &HardDesignParams) -> Result<HardDesign> {
    build_hard_design_with(params, &ReOptions::default())
}

/// Outcome of [`screen_block`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Screen {
    /// Normalization holds at `x`, the smallest scale whose support bound
    /// reaches the lower calibration tolerance.
    Admissible { x: f64 },
    /// Normalization already fails at that `x`, so no calibrated scale can pass.
    Infeasible { x: f64, ratio: f64 },
    /// Even at the largest bracket point the support bound stays below target.
    Unreachable,
}

/// Cheap feasibility test of a Gaussian block before calibration.
///
/// The RE estimate of `C_x` never exceeds `u(x)` from [`start_bound`], and
/// `γ(C_x)` is nondecreasing in `x` as `G(x)` grows in the PSD order; both `u` and the
/// `2k`-sparse normalization ratio are nondecreasing in `x`, so a block whose
/// ratio exceeds one where `u` first reaches `(1 − tol)·γ` cannot yield a
/// normalized design within tolerance. Returns `Admissible` without a verdict
/// when the exact normalization check is over budget.
pub fn screen_block(bk: &DMatrix<f64>, params: &HardDesignParams, r: &DMatrix<f64>) -> Result<Screen> {
    let (n, d, k) = (params.n, params.d, params.k());
    let floor = (1.0 - CALIBRATION_REL_TOL) * params.gamma_target;
    let supports: Vec<Vec<usize>> = if binomial(d, k) <= 20_000 {
        (0..d).combinations(k).collect()
    } else {
        return Ok(Screen::Admissible { x: 0.0 });
    };
    let bound = |x: f64| -> Result<f64> { Ok(start_bound(&gram(&build_cx_with(bk, n, x, r)?), k, &supports)) };
    let cap = 8.0 * core::f64::consts::SQRT_2 * libm::sqrt(params.gamma_target);
    if bound(cap)? < floor {
        return Ok(Screen::Unreachable);
    }
    let (mut lo, mut hi) = (0.0, cap);
    if bound(0.0)? < floor {
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if bound(mid)? < floor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        hi = 0.0;
    }
    if binomial(d, (2 * k).min(d)) > EXACT_NORMALIZATION_BUDGET {
        return Ok(Screen::Admissible { x: hi });
    }
    let check = check_normalization(&build_cx_with(bk, n, lo, r)?, k, NormalizationMode::Exact, 0)?;
    Ok(if check.pass { Screen::Admissible { x: hi } } else { Screen::Infeasible { x: lo, ratio: check.worst_ratio } })
}

pub fn build_hard_design_with(params: &HardDesignParams, opts: &ReOptions) -> Result<HardDesign> {
    params.validate()?;
    let k = params.k();
    let bk = top_block(params)?;
    let mode = if binomial(params.d, (2 * k).min(params.d)) <= EXACT_NORMALIZATION_BUDGET {
        NormalizationMode::Exact
    } else {
        NormalizationMode::Sampled
    };
    let bound = quantization_bound(params.n, params.d, params.l) + DESCENT_SLACK;
    let mut failures = Vec::new();
    let (mut calibrated, mut infeasible, mut unreachable, mut best_ratio) = (0, 0, 0, f64::INFINITY);
    for attempt in 0..SCREEN_CANDIDATES {
        if calibrated == CONSTRUCTION_ATTEMPTS {
            break;
        }
        let seed_used = if attempt == 0 { params.seed } else { derive_seed(params.seed, label("retry") ^ attempt) };
        let attempt_params = HardDesignParams { seed: seed_used, ..*params };
        match screen_block(&bk, &attempt_params, &gaussian_block(params.n, params.d, gaussian_seed(seed_used, 0)))? {
            Screen::Admissible { .. } => {}
            Screen::Infeasible { ratio, .. } => {
                infeasible += 1;
                best_ratio = best_ratio.min(ratio);
                continue;
            }
            Screen::Unreachable => {
                unreachable += 1;
                continue;
            }
        }
        calibrated += 1;
        let cal = calibrate_x_with(&attempt_params, opts)?;
        let r = gaussian_block(params.n, params.d, cal.r_seed);
        let cx = build_cx_with(&bk, params.n, cal.x, &r)?;
        let xq = cx.map(|v| quantize(v, params.l));
        let gamma_q = re_upper_bound_with(&xq, k, opts, re_seed(seed_used))?.gamma_hat;
        let normalization = check_normalization(&xq, k, mode, seed_used)?;
        if !normalization.pass {
            failures.push(format!("seed {seed_used}: normalization ratio {}", normalization.worst_ratio));
            continue;
        }
        if (gamma_q - cal.gamma_hat).abs() > bound {
            failures.push(format!(
                "seed {seed_used}: quantization moved RE estimate by {}",
                (gamma_q - cal.gamma_hat).abs()
            ));
            continue;
        }
        return Ok(HardDesign {
            x: xq,
            params: *params,
            seed_used,
            x_calibrated: cal.x,
            gamma_hat: gamma_q,
            gamma_hat_unquantized: cal.gamma_hat,
            r_seed: cal.r_seed,
            trace: cal.trace,
            normalization,
        });
    }
    if infeasible + unreachable > 0 {
        failures.push(format!(
            "{infeasible} Gaussian blocks screened out by normalization (smallest ratio {best_ratio}), \
{unreachable} cannot reach the target"
        ));
    }
    Err(Error::ConstructionFailed(failures.join("; ")))
}
