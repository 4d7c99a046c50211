//! Exponential functionals of the dual process: full and truncated
//! integrals, empirical tails with confidence bands, moment oracles and
//! tail-asymptotics helpers.
//!
//! Throughout, `triplet_hat` describes the dual process (the negation of
//! an entrance-law-compatible driver), so it drifts to minus infinity and
//! the integral of its exponential converges. The full functional is
//! sampled by integrating until the remainder bound `exp(-q) * mean` drops
//! below a caller tolerance times the accumulated integral; the truncated
//! functional integrates exactly up to the first passage below `-q`.

use serde::Serialize;
use thiserror::Error;

use crate::levy::{LevyError, LevyPath, LevyTriplet, Mgf, PathGenerator};
use crate::rng::Stream;
use crate::stats::{self, StatsError};

/// Hard cap on grid points per functional sample.
pub const MAX_POINTS_PER_SAMPLE: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum ExpFunError {
    #[error("condition (H) fails for the negated triplet: {0:?}")]
    ConditionHFailed(Vec<String>),
    #[error("point budget of {0} exceeded; parameters look pathological")]
    BudgetExceeded(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("undersized sample: need {need}, got {got}")]
    Undersized { need: usize, got: usize },
    #[error("tail estimates live on different threshold grids")]
    MismatchedGrids,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Bernstein exponent nonpositive at k={k}: phi(k)={value}")]
    PhiNonPositive { k: usize, value: f64 },
    #[error("bisection bracket exhausted: {0}")]
    BracketExhausted(String),
    #[error("no Cramer root: the moment generating function never returns to 1")]
    NoCramerRoot,
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One draw of an exponential functional.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpFunSample {
    /// The truncated integral.
    pub value: f64,
    /// Upper bound on the conditional expectation of the omitted
    /// remainder (zero for the exactly-truncated functional).
    pub truncation_bound: f64,
    /// Depth actually reached when integration stopped.
    pub q_used: f64,
}

/// Empirical survival function on a threshold grid with Wilson bands.
#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub thresholds: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_samples: usize,
}

impl TailEstimate {
    /// Step evaluation of the empirical survival at `u` (right-continuous,
    /// 1 below the grid). Returns `None` above the largest threshold.
    pub fn survival_at(&self, u: f64) -> Option<f64> {
        if u > *self.thresholds.last()? {
            return None;
        }
        let i = self.thresholds.partition_point(|&t| t <= u);
        if i == 0 {
            Some(1.0)
        } else {
            Some(self.survival[i - 1])
        }
    }
}

/// Left-endpoint cumulative integral of `exp(alpha * path)` on the grid.
///
/// Exact for piecewise-constant paths (whose jumps sit on grid points);
/// for diffusive paths it carries the declared left-step quadrature bias,
/// controlled by step refinement.
pub fn cumulative_exp_integral(path: &LevyPath, alpha: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    out.push((path.times[0], 0.0));
    for i in 1..path.len() {
        let dt = path.times[i] - path.times[i - 1];
        acc += (alpha * path.values[i - 1]).exp() * dt;
        out.push((path.times[i], acc));
    }
    out
}

/// Exact mean of the full exponential functional, when finite:
/// `E I = -1 / log E exp(xi_hat_1)` by Tonelli, since the expectation of
/// the integrand decays geometrically.
pub fn analytic_mean_exp_integral(triplet_hat: &LevyTriplet) -> Option<f64> {
    match triplet_hat.mgf_at(-1.0) {
        Mgf::Finite(v) if v < 1.0 && v > 0.0 => Some(-1.0 / v.ln()),
        _ => None,
    }
}

fn require_dual_drifts_down(triplet_hat: &LevyTriplet) -> Result<f64, ExpFunError> {
    let cond = triplet_hat.negate().condition_h();
    if !cond.holds {
        return Err(ExpFunError::ConditionHFailed(cond.reasons));
    }
    Ok(cond.m.expect("condition holds implies finite mean"))
}

enum StopRule {
    /// Stop at the first grid point at or below `-q`.
    Depth(f64),
    /// Stop once `exp(current value) * ibar <= tol * integral so far`.
    Adaptive { tol: f64, ibar: Option<f64> },
}

struct RunOutcome {
    path: LevyPath,
    /// Cumulative exponential integral at every grid index.
    integral: Vec<f64>,
    stop_index: usize,
    ibar_used: f64,
}

/// Streaming integration of `exp(xi_hat)` until the stop rule fires.
fn integrate_until(
    triplet_hat: &LevyTriplet,
    rule: StopRule,
    step: f64,
    rng: &mut Stream,
) -> Result<RunOutcome, ExpFunError> {
    let mut gen = PathGenerator::new(triplet_hat, step, rng)?;
    let mut times = vec![0.0];
    let mut values = vec![0.0f64];
    let mut jump_marks = Vec::new();
    let mut integral = vec![0.0f64];
    let mut acc = 0.0f64;
    let mut bootstrap: Option<f64> = None;
    loop {
        if times.len() > MAX_POINTS_PER_SAMPLE {
            return Err(ExpFunError::BudgetExceeded(MAX_POINTS_PER_SAMPLE));
        }
        let p = gen.next_point()?;
        let dt = p.t - times[times.len() - 1];
        acc += values[values.len() - 1].exp() * dt;
        if p.jumped {
            jump_marks.push(times.len());
        }
        times.push(p.t);
        values.push(p.value);
        integral.push(acc);
        let idx = times.len() - 1;
        match rule {
            StopRule::Depth(q) => {
                if p.value <= -q {
                    return Ok(RunOutcome {
                        path: LevyPath { times, values, jump_marks, step_nominal: step },
                        integral,
                        stop_index: idx,
                        ibar_used: 0.0,
                    });
                }
            }
            StopRule::Adaptive { tol, ibar } => {
                // Freeze a crude a-priori mean at the first passage below -3
                // when no analytic mean is available.
                if ibar.is_none() && bootstrap.is_none() && p.value <= -3.0 {
                    bootstrap = Some(3.0 * acc);
                }
                if let Some(ib) = ibar.or(bootstrap) {
                    if p.value < 0.0 && p.value.exp() * ib <= tol * acc {
                        return Ok(RunOutcome {
                            path: LevyPath { times, values, jump_marks, step_nominal: step },
                            integral,
                            stop_index: idx,
                            ibar_used: ib,
                        });
                    }
                }
            }
        }
    }
}

/// Sample the full exponential functional by adaptive truncation.
///
/// The stopping depth is chosen on the fly so that the conditional
/// expected remainder, bounded by `exp(-depth)` times an a-priori mean of
/// the functional, is at most `tol` times the integral accumulated so
/// far. Requires the negated triplet to satisfy the convergence gate.
pub fn sample_exp_integral(
    triplet_hat: &LevyTriplet,
    tol: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<ExpFunSample, ExpFunError> {
    let (sample, _) = sample_exp_integral_with_path(triplet_hat, tol, step, rng)?;
    Ok(sample)
}

/// Same as [`sample_exp_integral`] but also returns the simulated path
/// and its cumulative integral, for bookkeeping-identity checks.
pub fn sample_exp_integral_with_path(
    triplet_hat: &LevyTriplet,
    tol: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<(ExpFunSample, RunRecord), ExpFunError> {
    if !(tol > 0.0) {
        return Err(ExpFunError::Precondition(format!("tol {tol} must be > 0")));
    }
    require_dual_drifts_down(triplet_hat)?;
    let ibar = analytic_mean_exp_integral(triplet_hat);
    let out = integrate_until(triplet_hat, StopRule::Adaptive { tol, ibar }, step, rng)?;
    let q_used = -out.path.values[out.stop_index];
    let value = out.integral[out.stop_index];
    let sample = ExpFunSample {
        value,
        truncation_bound: (-q_used).exp() * out.ibar_used,
        q_used,
    };
    Ok((sample, RunRecord { path: out.path, integral: out.integral, stop_index: out.stop_index }))
}

/// A simulated dual path with its cumulative exponential integral.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub path: LevyPath,
    pub integral: Vec<f64>,
    pub stop_index: usize,
}

/// Sample the truncated functional: integrate exactly up to the first
/// passage of the dual below `-q`.
pub fn sample_exp_integral_truncated(
    triplet_hat: &LevyTriplet,
    q: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<ExpFunSample, ExpFunError> {
    let (sample, _) = sample_exp_integral_truncated_with_path(triplet_hat, q, step, rng)?;
    Ok(sample)
}

/// Truncated functional together with the simulated path, its cumulative
/// integral and the passage index.
pub fn sample_exp_integral_truncated_with_path(
    triplet_hat: &LevyTriplet,
    q: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<(ExpFunSample, RunRecord), ExpFunError> {
    if !(q > 0.0) {
        return Err(ExpFunError::Precondition(format!("q {q} must be > 0")));
    }
    require_dual_drifts_down(triplet_hat)?;
    let out = integrate_until(triplet_hat, StopRule::Depth(q), step, rng)?;
    let sample = ExpFunSample {
        value: out.integral[out.stop_index],
        truncation_bound: 0.0,
        q_used: q,
    };
    Ok((sample, RunRecord { path: out.path, integral: out.integral, stop_index: out.stop_index }))
}

/// Empirical survival with Wilson 95% bands on a threshold grid.
pub fn estimate_tail(samples: &[f64], thresholds: &[f64]) -> Result<TailEstimate, ExpFunError> {
    if samples.is_empty() {
        return Err(ExpFunError::EmptySample);
    }
    if samples.len() < 100 {
        return Err(ExpFunError::Undersized { need: 100, got: samples.len() });
    }
    if thresholds.is_empty() {
        return Err(ExpFunError::Precondition("no thresholds given".into()));
    }
    let mut grid = thresholds.to_vec();
    grid.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN threshold"));
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let n = sorted.len();
    let mut survival = Vec::with_capacity(grid.len());
    let mut ci_low = Vec::with_capacity(grid.len());
    let mut ci_high = Vec::with_capacity(grid.len());
    for &t in &grid {
        let above = n - sorted.partition_point(|&x| x <= t);
        let (lo, hi) = stats::wilson_ci(above, n, 0.95)?;
        survival.push(above as f64 / n as f64);
        ci_low.push(lo);
        ci_high.push(hi);
    }
    Ok(TailEstimate { thresholds: grid, survival, ci_low, ci_high, n_samples: n })
}

/// Empirical raw moments `E X^k`, `k = 1..=n_max`.
pub fn moments(samples: &[f64], n_max: usize) -> Vec<f64> {
    (1..=n_max)
        .map(|k| samples.iter().map(|x| x.powi(k as i32)).sum::<f64>() / samples.len() as f64)
        .collect()
}

/// Moments of the exponential functional of a subordinator dual with
/// Bernstein exponent `phi`: `E I^n = n! / prod_{k=1..n} phi(k)`.
pub fn oracle_moments<F: Fn(f64) -> f64>(
    phi: F,
    n_max: usize,
) -> Result<Vec<f64>, ExpFunError> {
    let mut out = Vec::with_capacity(n_max);
    let mut m = 1.0;
    for k in 1..=n_max {
        let p = phi(k as f64);
        if !(p > 0.0) {
            return Err(ExpFunError::PhiNonPositive { k, value: p });
        }
        m *= k as f64 / p;
        out.push(m);
    }
    Ok(out)
}

/// Positive root of `E exp(-gamma xi_1) = 1`, found by bracket scan and
/// bisection to relative tolerance 1e-10.
pub fn cramer_gamma(triplet: &LevyTriplet) -> Result<f64, ExpFunError> {
    let value = |theta: f64| triplet.mgf_at(theta);
    // Scan for an upper bracket where the MGF exceeds 1 (treating a
    // divergent value as above 1).
    let mut lo = 0.0f64;
    let mut hi = None;
    let mut theta = 1e-4;
    while theta < 1e7 {
        match value(theta) {
            Mgf::Finite(v) if v < 1.0 => lo = theta,
            _ => {
                hi = Some(theta);
                break;
            }
        }
        theta *= 2.0;
    }
    let mut hi = hi.ok_or(ExpFunError::NoCramerRoot)?;
    if lo == 0.0 {
        // The MGF exceeded 1 immediately; no initial dip means no
        // strictly positive root under the calling convention.
        return Err(ExpFunError::NoCramerRoot);
    }
    for _ in 0..400 {
        if (hi - lo) <= 1e-10 * hi.abs().max(1e-30) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match value(mid) {
            Mgf::Finite(v) if v < 1.0 => lo = mid,
            _ => hi = mid,
        }
    }
    // Guard against a divergence boundary glued to a sub-1 MGF: the root
    // must actually bring the MGF back to 1.
    match value(lo) {
        Mgf::Finite(v) if (v - 1.0).abs() < 1e-6 => Ok(0.5 * (lo + hi)),
        _ => Err(ExpFunError::NoCramerRoot),
    }
}

/// Per-threshold row of the sandwich check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SandwichRow {
    pub threshold: f64,
    pub survival_full: f64,
    pub survival_truncated: f64,
    /// Whether the row is in the asserted top decile (rows below it are
    /// informational only).
    pub asserted: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub factor: f64,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
    pub passed: bool,
}

/// Check `(1 - exp(-gamma q)) F <= F_q <= F` within combined CI slack on
/// the top decile of a common threshold grid.
pub fn check_fq_sandwich(
    tail_full: &TailEstimate,
    tail_truncated: &TailEstimate,
    gamma: f64,
    q: f64,
) -> Result<SandwichReport, ExpFunError> {
    if tail_full.thresholds != tail_truncated.thresholds {
        return Err(ExpFunError::MismatchedGrids);
    }
    let n = tail_full.thresholds.len();
    let decile_start = n - (n / 10).max(1);
    let factor = 1.0 - (-gamma * q).exp();
    let mut rows = Vec::with_capacity(n);
    let mut violations = 0;
    for i in 0..n {
        let slack = (tail_full.ci_high[i] - tail_full.ci_low[i]) / 2.0
            + (tail_truncated.ci_high[i] - tail_truncated.ci_low[i]) / 2.0;
        let lower_ok =
            tail_truncated.ci_high[i] >= factor * tail_full.ci_low[i] - slack;
        let upper_ok = tail_truncated.ci_low[i] <= tail_full.ci_high[i] + slack;
        let asserted = i >= decile_start;
        if asserted && !(lower_ok && upper_ok) {
            violations += 1;
        }
        rows.push(SandwichRow {
            threshold: tail_full.thresholds[i],
            survival_full: tail_full.survival[i],
            survival_truncated: tail_truncated.survival[i],
            asserted,
            lower_ok,
            upper_ok,
        });
    }
    Ok(SandwichReport { factor, rows, violations, passed: violations == 0 })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioBoundRow {
    pub threshold: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioBoundReport {
    pub rows: Vec<RatioBoundRow>,
    pub passed: bool,
}

/// Finite-sample version of the tail-ratio inequality
/// `1 - F(gamma_ratio t)/F(t) <= F_q((1-delta) t)/F(t)` at large
/// thresholds, with Wilson slack. Requires `delta > gamma_ratio exp(-q)`.
pub fn check_ratio_bound(
    samples_full: &[f64],
    samples_truncated: &[f64],
    gamma_ratio: f64,
    delta: f64,
    q: f64,
    thresholds: Option<&[f64]>,
) -> Result<RatioBoundReport, ExpFunError> {
    if gamma_ratio <= 1.0 {
        return Err(ExpFunError::Precondition(format!(
            "gamma_ratio {gamma_ratio} must exceed 1"
        )));
    }
    if !(delta > gamma_ratio * (-q).exp()) {
        return Err(ExpFunError::Precondition(format!(
            "delta {delta} must exceed gamma_ratio*exp(-q) = {}",
            gamma_ratio * (-q).exp()
        )));
    }
    // delta = 1 is the trivial boundary: the truncated survival is
    // evaluated at 0 where it equals 1.
    if !(delta <= 1.0) {
        return Err(ExpFunError::Precondition(format!("delta {delta} must be <= 1")));
    }
    let default_grid;
    let grid = match thresholds {
        Some(g) => g,
        None => {
            default_grid = [0.90, 0.93, 0.95, 0.97]
                .iter()
                .map(|&p| stats::quantile(samples_full, p))
                .collect::<Vec<_>>();
            &default_grid
        }
    };
    let frac = |samples: &[f64], t: f64| -> (f64, f64) {
        let k = samples.iter().filter(|&&x| x > t).count();
        let (lo, hi) = stats::wilson_ci(k, samples.len(), 0.95).expect("valid counts");
        (k as f64 / samples.len() as f64, (hi - lo) / 2.0)
    };
    let mut rows = Vec::new();
    for &t in grid {
        let (f_t, hw_t) = frac(samples_full, t);
        let (f_gt, hw_gt) = frac(samples_full, gamma_ratio * t);
        let (fq, hw_q) = frac(samples_truncated, (1.0 - delta) * t);
        let lhs = f_t - f_gt;
        let rhs = fq;
        let slack = hw_t + hw_gt + hw_q;
        rows.push(RatioBoundRow { threshold: t, lhs, rhs, slack, ok: lhs <= rhs + slack });
    }
    let passed = rows.iter().all(|r| r.ok);
    Ok(RatioBoundReport { rows, passed })
}

/// Asymptotic log-tail model for a subordinator dual whose Bernstein
/// exponent is regularly varying with index `beta` in (0,1): returns
/// `(1 - beta) * phi_inv(t)` where `phi_inv(t) = inf{s : s/phi(s) > t}`,
/// found by monotone bisection.
pub fn log_tail_model<F: Fn(f64) -> f64>(
    phi: F,
    beta: f64,
    t: f64,
) -> Result<f64, ExpFunError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ExpFunError::Precondition(format!("beta {beta} outside (0,1)")));
    }
    if !(t > 0.0) {
        return Err(ExpFunError::Precondition(format!("t {t} must be > 0")));
    }
    let g = |s: f64| -> Result<f64, ExpFunError> {
        let p = phi(s);
        if !(p > 0.0) {
            return Err(ExpFunError::Precondition(format!("phi({s}) = {p} nonpositive")));
        }
        Ok(s / p)
    };
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while g(hi)? <= t {
        hi *= 2.0;
        doublings += 1;
        if doublings > 4000 {
            return Err(ExpFunError::BracketExhausted(format!(
                "s/phi(s) never exceeded {t}"
            )));
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        // The crossing is at or below 1: shrink the lower end.
        lo = 1.0;
        let mut halvings = 0;
        while g(lo)? > t {
            lo /= 2.0;
            halvings += 1;
            if halvings > 4000 {
                return Err(ExpFunError::BracketExhausted(format!(
                    "s/phi(s) stayed above {t} down to {lo}"
                )));
            }
        }
        hi = lo * 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((1.0 - beta) * 0.5 * (lo + hi))
}
