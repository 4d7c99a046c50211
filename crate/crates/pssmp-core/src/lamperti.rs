//! The Lamperti bijection between Levy paths and positive self-similar
//! Markov paths, the scaling check, the entrance law at zero, the
//! zero-hitting identity and the occupation-measure identity.
//!
//! The transform is realized exactly on the discrete grid: the
//! time-changed clock is the cumulative exponential integral of the
//! driving path, so inverting the time change is index bookkeeping with
//! no root finding. The process started at zero is realized two ways,
//! both exercised against each other: a small-start proxy path and an
//! importance-weighted entrance sampler built from the exponential
//! functional of the dual.

use serde::Serialize;
use thiserror::Error;

use crate::expfun::{
    cumulative_exp_integral, sample_exp_integral, sample_exp_integral_with_path,
    ExpFunError, MAX_POINTS_PER_SAMPLE,
};
use crate::levy::{LevyError, LevyPath, LevyTriplet, PathGenerator};
use crate::rng::{parallel_replicates, Stream};
use crate::stats::{self, KsReport, StatsError};

#[derive(Debug, Error)]
pub enum LampertiError {
    #[error("condition (H) fails: {0:?}")]
    ConditionHFailed(Vec<String>),
    #[error("parameter must be positive: {0}")]
    NonPositive(String),
    #[error("path touches zero before its end")]
    PathTouchesZero,
    #[error("point budget of {0} exceeded while chasing the time change")]
    BudgetExceeded(usize),
    #[error("horizon too short: {failures} of {n} paths ended inside the 10x support margin")]
    HorizonTooShort { failures: usize, n: usize },
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    ExpFun(#[from] ExpFunError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A discretized positive self-similar Markov path.
///
/// Same left-step convention as [`LevyPath`]: the value in force on
/// `[times[i], times[i+1])` is `values[i]`. `lifetime` is the absorption
/// time at zero with `f64::INFINITY` as the not-absorbed sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct PssMpPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub start_x: f64,
    pub alpha: f64,
    pub lifetime: f64,
}

impl PssMpPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("empty path")
    }

    pub fn terminal_value(&self) -> f64 {
        *self.values.last().expect("empty path")
    }

    /// Left-step evaluation at `t`; `None` outside `[0, horizon]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 || t > self.horizon() {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        Some(self.values[i - 1])
    }
}

/// Carry a Levy path into the self-similar path started at `x`.
///
/// Output grid times are `x^alpha * I_i` on the discrete cumulative
/// exponential integral `I`, values are `x * exp(xi_i)`; the time change
/// is exact on the grid.
pub fn to_pssmp(levy_path: &LevyPath, x: f64, alpha: f64) -> Result<PssMpPath, LampertiError> {
    if !(x > 0.0) {
        return Err(LampertiError::NonPositive(format!("start point x = {x}")));
    }
    if !(alpha > 0.0) {
        return Err(LampertiError::NonPositive(format!("alpha = {alpha}")));
    }
    let scale = x.powf(alpha);
    let integral = cumulative_exp_integral(levy_path, alpha);
    let times: Vec<f64> = integral.iter().map(|&(_, i)| scale * i).collect();
    let values: Vec<f64> = levy_path.values.iter().map(|&v| x * v.exp()).collect();
    Ok(PssMpPath { times, values, start_x: x, alpha, lifetime: f64::INFINITY })
}

/// Invert the Lamperti transform on the grid.
///
/// Round-tripping `to_pssmp` then `from_pssmp` reproduces times and
/// values to relative 1e-10; the inversion is pure index bookkeeping.
pub fn from_pssmp(path: &PssMpPath) -> Result<LevyPath, LampertiError> {
    if !(path.start_x > 0.0) {
        return Err(LampertiError::NonPositive(format!(
            "start point x = {}",
            path.start_x
        )));
    }
    if path.values.iter().any(|&v| !(v > 0.0)) {
        return Err(LampertiError::PathTouchesZero);
    }
    let n = path.len();
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    times.push(0.0);
    values.push((path.values[0] / path.start_x).ln());
    for i in 1..n {
        let dt = path.times[i] - path.times[i - 1];
        let ds = dt / path.values[i - 1].powf(path.alpha);
        times.push(times[i - 1] + ds);
        values.push((path.values[i] / path.start_x).ln());
    }
    let step = if n > 1 { times[n - 1] / (n - 1) as f64 } else { 1.0 };
    Ok(LevyPath { times, values, jump_marks: Vec::new(), step_nominal: step })
}

/// Budgeted streaming simulation of the marginal `X^(x)` at a fixed time.
///
/// Drives the Levy generator until the time-changed clock passes the
/// probe time and reads the value in force there, matching the left-step
/// convention of [`PssMpPath::value_at`]. A path whose driver sinks below
/// -600 has an exponentially dead clock and is reported as absorbed (0).
pub fn marginal_at(
    triplet: &LevyTriplet,
    x: f64,
    alpha: f64,
    t_probe: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<f64, LampertiError> {
    if !(x > 0.0) || !(alpha > 0.0) || !(t_probe > 0.0) {
        return Err(LampertiError::NonPositive(format!(
            "x = {x}, alpha = {alpha}, t_probe = {t_probe} must all be > 0"
        )));
    }
    let scale = x.powf(alpha);
    let mut gen = PathGenerator::new(triplet, step, rng)?;
    let mut t_prev = 0.0f64;
    let mut v_prev = 0.0f64;
    let mut clock = 0.0f64;
    for _ in 0..MAX_POINTS_PER_SAMPLE {
        let p = gen.next_point()?;
        let dt = p.t - t_prev;
        let clock_next = clock + scale * (alpha * v_prev).exp() * dt;
        if clock_next >= t_probe {
            return Ok(x * v_prev.exp());
        }
        if p.value <= -600.0 {
            return Ok(0.0);
        }
        t_prev = p.t;
        v_prev = p.value;
        clock = clock_next;
    }
    Err(LampertiError::BudgetExceeded(MAX_POINTS_PER_SAMPLE))
}

/// Two-sample KS check of the scaling identity: `k X^(x)` run at time
/// `k^{-alpha} t_probe` against `X^(kx)` at `t_probe`.
#[allow(clippy::too_many_arguments)]
pub fn rescale_check(
    triplet: &LevyTriplet,
    x: f64,
    k: f64,
    alpha: f64,
    t_probe: f64,
    n_paths: usize,
    step: f64,
    master_seed: u64,
) -> Result<KsReport, LampertiError> {
    if !(k > 0.0) {
        return Err(LampertiError::NonPositive(format!("k = {k}")));
    }
    let scaled: Result<Vec<f64>, LampertiError> =
        parallel_replicates(master_seed, 0, n_paths, |_, rng| {
            marginal_at(triplet, x, alpha, t_probe / k.powf(alpha), step, rng).map(|v| k * v)
        })
        .into_iter()
        .collect();
    let direct: Result<Vec<f64>, LampertiError> =
        parallel_replicates(master_seed, 1, n_paths, |_, rng| {
            marginal_at(triplet, k * x, alpha, t_probe, step, rng)
        })
        .into_iter()
        .collect();
    Ok(stats::ks_two_sample(&scaled?, &direct?)?)
}

/// Importance-weighted sample of the entrance marginal at time `t`.
#[derive(Debug, Clone, Serialize)]
pub struct EntranceSample {
    /// Proposed positions `t / I_i`.
    pub values: Vec<f64>,
    /// Self-normalized weights summing to one.
    pub weights: Vec<f64>,
    /// Raw weights `1/(m I_i)`, whose population mean is exactly one.
    pub raw_weights: Vec<f64>,
    /// Mean at unit time of the driver.
    pub m: f64,
}

/// Draw the entrance marginal by the exponential-functional identity:
/// value `t / I` weighted by `1/I`, with `I` the exponential functional
/// of the dual process.
pub fn entrance_sampler(
    triplet: &LevyTriplet,
    t: f64,
    n: usize,
    tol: f64,
    step: f64,
    master_seed: u64,
) -> Result<EntranceSample, LampertiError> {
    if !(t > 0.0) {
        return Err(LampertiError::NonPositive(format!("t = {t}")));
    }
    let cond = triplet.condition_h();
    if !cond.holds {
        return Err(LampertiError::ConditionHFailed(cond.reasons));
    }
    let m = cond.m.expect("condition holds");
    let hat = triplet.negate();
    let draws: Result<Vec<f64>, LampertiError> =
        parallel_replicates(master_seed, 0, n, |_, rng| {
            Ok(sample_exp_integral(&hat, tol, step, rng)?.value)
        })
        .into_iter()
        .collect();
    let draws = draws?;
    let inv: Vec<f64> = draws.iter().map(|i| 1.0 / i).collect();
    let total: f64 = inv.iter().sum();
    Ok(EntranceSample {
        values: draws.iter().map(|i| t / i).collect(),
        weights: inv.iter().map(|w| w / total).collect(),
        raw_weights: inv.iter().map(|w| w / m).collect(),
        m,
    })
}

/// Proxy for the process started at zero: the path from `x_small`,
/// streamed until the time-changed clock covers `horizon`.
pub fn simulate_from_zero(
    triplet: &LevyTriplet,
    x_small: f64,
    alpha: f64,
    horizon: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<PssMpPath, LampertiError> {
    if !(x_small > 0.0) || !(horizon > 0.0) {
        return Err(LampertiError::NonPositive(format!(
            "x_small = {x_small}, horizon = {horizon}"
        )));
    }
    let cond = triplet.condition_h();
    if !cond.holds {
        return Err(LampertiError::ConditionHFailed(cond.reasons));
    }
    let scale = x_small.powf(alpha);
    let mut gen = PathGenerator::new(triplet, step, rng)?;
    let mut times = vec![0.0];
    let mut values = vec![0.0f64];
    let mut jump_marks = Vec::new();
    let mut clock = 0.0f64;
    loop {
        if times.len() > MAX_POINTS_PER_SAMPLE {
            return Err(LampertiError::BudgetExceeded(MAX_POINTS_PER_SAMPLE));
        }
        let p = gen.next_point()?;
        let dt = p.t - times[times.len() - 1];
        clock += scale * (alpha * values[values.len() - 1]).exp() * dt;
        if p.jumped {
            jump_marks.push(times.len());
        }
        times.push(p.t);
        values.push(p.value);
        if clock >= horizon {
            break;
        }
    }
    let levy = LevyPath { times, values, jump_marks, step_nominal: step };
    to_pssmp(&levy, x_small, alpha)
}

/// Per-path report of the zero-hitting identity for the dual process.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroHitReport {
    /// Terminal time of the transformed dual path (absorption estimate).
    pub absorption_time: f64,
    /// `x` times the cumulative exponential integral of the same path.
    pub x_times_integral: f64,
    /// Whether the two agree exactly (they are the same arithmetic).
    pub exact: bool,
    /// Dual path value where integration stopped.
    pub terminal_value: f64,
    /// `x` times the declared conditional remainder bound.
    pub remaining_time_bound: f64,
}

/// Build the dual path from `x`, transform it, and assert the absorption
/// identity: the hitting time of zero is `x` times the exponential
/// integral, exactly, up to the declared truncation bound.
pub fn zero_hit_time_check(
    triplet: &LevyTriplet,
    x: f64,
    tol: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<ZeroHitReport, LampertiError> {
    if !(x > 0.0) {
        return Err(LampertiError::NonPositive(format!("x = {x}")));
    }
    let hat = triplet.negate();
    let (sample, record) = sample_exp_integral_with_path(&hat, tol, step, rng)?;
    let dual = to_pssmp(&record.path, x, 1.0)?;
    let absorption_time = dual.horizon();
    let x_times_integral = x * sample.value;
    Ok(ZeroHitReport {
        absorption_time,
        x_times_integral,
        exact: absorption_time == x_times_integral,
        terminal_value: dual.terminal_value(),
        remaining_time_bound: x * sample.truncation_bound,
    })
}

/// Union of half-open intervals `[a, b)`, the test functions for the
/// occupation identity.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, LampertiError> {
        for &(a, b) in &intervals {
            if !(0.0 <= a && a < b) {
                return Err(LampertiError::NonPositive(format!(
                    "interval [{a}, {b}) must satisfy 0 <= a < b"
                )));
            }
        }
        Ok(IntervalUnion { intervals })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= v && v < b)
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).sum()
    }

    pub fn sup_support(&self) -> f64 {
        self.intervals.iter().map(|&(_, b)| b).fold(0.0, f64::max)
    }
}

/// Occupation time of a path inside an interval union, on the step grid.
pub fn occupation_time(path: &PssMpPath, f: &IntervalUnion) -> f64 {
    let mut acc = 0.0;
    for i in 1..path.len() {
        if f.contains(path.values[i - 1]) {
            acc += path.times[i] - path.times[i - 1];
        }
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupationReport {
    pub estimate: f64,
    pub standard_error: f64,
    pub target: f64,
    pub z_score: f64,
    pub passed: bool,
    /// Paths excluded because their terminal margin was under 10x the
    /// support supremum (re-entry risk).
    pub margin_failures: usize,
    pub n_used: usize,
}

/// Monte Carlo check of the occupation identity: the expected time the
/// zero-start process spends in a set equals the set's length over `m`.
#[allow(clippy::too_many_arguments)]
pub fn occupation_identity_check(
    triplet: &LevyTriplet,
    f: &IntervalUnion,
    n_paths: usize,
    x_small: f64,
    horizon: f64,
    step: f64,
    master_seed: u64,
) -> Result<OccupationReport, LampertiError> {
    let cond = triplet.condition_h();
    if !cond.holds {
        return Err(LampertiError::ConditionHFailed(cond.reasons));
    }
    let m = cond.m.expect("condition holds");
    let sup = f.sup_support();
    let runs: Result<Vec<(f64, bool)>, LampertiError> =
        parallel_replicates(master_seed, 0, n_paths, |_, rng| {
            let path = simulate_from_zero(triplet, x_small, 1.0, horizon, step, rng)?;
            let margin_ok = path.terminal_value() >= 10.0 * sup;
            Ok((occupation_time(&path, f), margin_ok))
        })
        .into_iter()
        .collect();
    let runs = runs?;
    let kept: Vec<f64> = runs.iter().filter(|r| r.1).map(|r| r.0).collect();
    let margin_failures = n_paths - kept.len();
    if margin_failures * 20 > n_paths {
        return Err(LampertiError::HorizonTooShort { failures: margin_failures, n: n_paths });
    }
    let estimate = stats::mean(&kept);
    let se = stats::standard_error(&kept);
    let target = f.total_length() / m;
    let z = (estimate - target) / se.max(1e-300);
    Ok(OccupationReport {
        estimate,
        standard_error: se,
        target,
        z_score: z,
        passed: z.abs() <= 3.0,
        margin_failures,
        n_used: kept.len(),
    })
}
