//! Last-passage times, time reversal, the limiting relative-position law
//! at last passage, the recursive level decomposition and its sandwich
//! bounds, and the closing identity tying the last-passage time to the
//! exponential functional.
//!
//! Overshoot convention: a level crossing detected at a non-jump grid
//! point comes from the continuous part of the motion, whose true
//! crossing is continuous, so its overshoot is taken as exactly zero; a
//! crossing at a compound-Poisson epoch reports the exact jump overshoot.
//! This makes the continuous-driver degeneracies (`ratio = 1`,
//! `Gamma_n = x_n`) hold exactly rather than up to grid noise.

use serde::Serialize;
use thiserror::Error;

use crate::expfun::{
    sample_exp_integral, sample_exp_integral_truncated_with_path, ExpFunError,
    MAX_POINTS_PER_SAMPLE,
};
use crate::lamperti::{simulate_from_zero, LampertiError, PssMpPath};
use crate::levy::{LevyError, LevyPath, LevyTriplet, PathGenerator};
use crate::rng::{parallel_replicates, Stream};
use crate::stats::{self, KsReport, OneSidedKsReport, StatsError};

#[derive(Debug, Error)]
pub enum ReversalError {
    #[error("condition (H) fails: {0:?}")]
    ConditionHFailed(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("passage not reached within the point budget of {0}")]
    PassageBudgetExceeded(usize),
    #[error("levels must be strictly decreasing and positive, got {0:?}")]
    BadLevels(Vec<f64>),
    #[error("too many unresolved last passages: {unresolved} of {n}")]
    TooManyUnresolved { unresolved: usize, n: usize },
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    ExpFun(#[from] ExpFunError),
    #[error(transparent)]
    Lamperti(#[from] LampertiError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One draw of the limiting relative position at last passage: the ratio
/// of the pre-passage value to the crossed level, in `(0, 1]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaSample {
    pub ratio: f64,
    /// Depth from which the stationary overshoot was read; infinite for
    /// the analytic oracle sampler.
    pub depth_used: f64,
}

/// Last grid time at or below `y`, certified only when the path has
/// visibly escaped: terminal value at least `10 y` and the final tenth of
/// the time span strictly above `2 y`. Uncertified paths return `None`;
/// a certified path that never returns to `(0, y]` after time zero
/// resolves to `0` (supremum of the empty set).
pub fn last_passage(path: &PssMpPath, y: f64) -> Option<f64> {
    assert!(y > 0.0, "level must be positive");
    let horizon = path.horizon();
    if path.terminal_value() < 10.0 * y {
        return None;
    }
    let tail_start = 0.9 * horizon;
    for i in (0..path.len()).rev() {
        if path.times[i] < tail_start {
            break;
        }
        if path.values[i] <= 2.0 * y {
            return None;
        }
    }
    for i in (0..path.len()).rev() {
        if path.values[i] <= y {
            return Some(path.times[i]);
        }
    }
    Some(0.0)
}

/// Grid reversal with the left-limit convention: the reversed path at
/// clock `u` holds the value in force just before `at - u` on the
/// original. The start value is the value at `at-`, the terminal value is
/// the original start. `at` snaps down to the last grid point at or
/// before it.
pub fn reverse_path(path: &PssMpPath, at: f64) -> Result<PssMpPath, ReversalError> {
    if !(at > 0.0 && at <= path.horizon()) {
        return Err(ReversalError::InvalidParameter(format!(
            "reversal time {at} outside (0, horizon = {}]",
            path.horizon()
        )));
    }
    let n = path.times.partition_point(|&s| s <= at) - 1;
    if n == 0 {
        return Err(ReversalError::InvalidParameter(format!(
            "reversal time {at} precedes the first positive grid point"
        )));
    }
    let anchor = path.times[n];
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for j in 0..=n {
        times.push(anchor - path.times[n - j]);
        values.push(if j < n { path.values[n - j - 1] } else { path.values[0] });
    }
    Ok(PssMpPath {
        start_x: values[0],
        alpha: path.alpha,
        lifetime: f64::INFINITY,
        times,
        values,
    })
}

/// Read the stationary overshoot of the dual at depth `z`: simulate the
/// dual to its first passage below `-z` and return `exp(overshoot)`,
/// with the continuous-crossing clamp described in the module docs.
pub fn sample_gamma(
    triplet: &LevyTriplet,
    depth_z: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<GammaSample, ReversalError> {
    if !(depth_z > 0.0) {
        return Err(ReversalError::InvalidParameter(format!(
            "depth {depth_z} must be > 0"
        )));
    }
    let cond = triplet.condition_h();
    if !cond.holds {
        return Err(ReversalError::ConditionHFailed(cond.reasons));
    }
    let hat = triplet.negate();
    let mut gen = PathGenerator::new(&hat, step, rng)?;
    for _ in 0..MAX_POINTS_PER_SAMPLE {
        let p = gen.next_point()?;
        if p.value <= -depth_z {
            let overshoot = if p.jumped { p.value + depth_z } else { 0.0 };
            return Ok(GammaSample { ratio: overshoot.exp(), depth_used: depth_z });
        }
    }
    Err(ReversalError::PassageBudgetExceeded(MAX_POINTS_PER_SAMPLE))
}

/// Analytic counterpart of [`sample_gamma`] for drivers whose ascending
/// ladder height is exponential with rate `mu`: the limiting log-ratio is
/// minus a uniform times a size-biased exponential (a rate-`mu` gamma of
/// shape two), both sampled by inversion.
pub fn gamma_oracle_exponential(
    mu: f64,
    n: usize,
    rng: &mut Stream,
) -> Result<Vec<GammaSample>, ReversalError> {
    use rand::Rng;
    if !(mu > 0.0) {
        return Err(ReversalError::InvalidParameter(format!("mu {mu} must be > 0")));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let e1: f64 = -(1.0 - rng.random::<f64>()).max(1e-300).ln();
        let e2: f64 = -(1.0 - rng.random::<f64>()).max(1e-300).ln();
        let z = (e1 + e2) / mu;
        out.push(GammaSample { ratio: (-u * z).exp(), depth_used: f64::INFINITY });
    }
    Ok(out)
}

/// Stored randomness of one decomposition segment: the dual path run to
/// its passage below `target_level`, with its cumulative exponential
/// integral.
#[derive(Debug, Clone)]
pub struct SegmentRecord {
    pub path: LevyPath,
    pub integral: Vec<f64>,
    pub stop_index: usize,
    pub target_level: f64,
}

/// The level decomposition of the last-passage time: positions at each
/// level, segment durations between consecutive last passages, and the
/// tail-sum last-passage times.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub levels: Vec<f64>,
    /// Positions `Gamma_1..Gamma_N` (each at most its level).
    pub gamma_seq: Vec<f64>,
    /// Durations `H_1..H_{N-1}` between consecutive level passages.
    pub durations: Vec<f64>,
    /// Tail sums `U(x_1)..U(x_N)` over the stored segments.
    pub u_values: Vec<f64>,
    /// Per-transition randomness (`None` when the position was already
    /// below the next level and the passage is instantaneous).
    pub segments: Vec<Option<SegmentRecord>>,
}

/// Run the level recursion: fresh dual segments between consecutive
/// levels, position updates from the (clamped) overshoots, durations from
/// the truncated exponential integrals, and last-passage times as exact
/// tail sums.
pub fn build_decomposition(
    triplet: &LevyTriplet,
    levels: &[f64],
    gamma0: GammaSample,
    step: f64,
    rng: &mut Stream,
) -> Result<Decomposition, ReversalError> {
    if levels.len() < 2
        || levels.windows(2).any(|w| !(w[1] < w[0]))
        || levels.iter().any(|&x| !(x > 0.0))
    {
        return Err(ReversalError::BadLevels(levels.to_vec()));
    }
    let cond = triplet.condition_h();
    if !cond.holds {
        return Err(ReversalError::ConditionHFailed(cond.reasons));
    }
    let hat = triplet.negate();
    let n_levels = levels.len();
    let mut gamma_seq = Vec::with_capacity(n_levels);
    let mut durations = Vec::with_capacity(n_levels - 1);
    let mut segments = Vec::with_capacity(n_levels - 1);
    gamma_seq.push(gamma0.ratio * levels[0]);
    for n in 0..n_levels - 1 {
        let gamma_n = gamma_seq[n];
        let x_next = levels[n + 1];
        if gamma_n <= x_next {
            // Already at or below the next level: instantaneous passage.
            durations.push(0.0);
            segments.push(None);
            gamma_seq.push(gamma_n);
            continue;
        }
        let target = (x_next / gamma_n).ln();
        let (_, record) =
            sample_exp_integral_truncated_with_path(&hat, -target, step, rng)?;
        let stop = record.stop_index;
        let overshoot = if record.path.is_jump_index(stop) {
            record.path.values[stop] - target
        } else {
            0.0
        };
        durations.push(gamma_n * record.integral[stop]);
        gamma_seq.push(x_next * overshoot.exp());
        segments.push(Some(SegmentRecord {
            path: record.path,
            integral: record.integral,
            stop_index: stop,
            target_level: target,
        }));
    }
    let u_values: Vec<f64> = (0..n_levels)
        .map(|n| durations[n..].iter().sum())
        .collect();
    Ok(Decomposition { levels: levels.to_vec(), gamma_seq, durations, u_values, segments })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// Pathwise lower-bound checks actually performed.
    pub lower_checked: usize,
    pub lower_violations: usize,
    /// Choices of `z` outside the relevance window `(x_{n+1}, x_n)`.
    pub vacuous: usize,
    /// Per-level one-sided KS of stored last-passage times against the
    /// scaled exponential-functional samples.
    pub upper: Vec<(usize, OneSidedKsReport)>,
    pub passed: bool,
}

/// Check the sandwich bounds on a batch of decompositions sharing one
/// level grid: the lower bound pathwise on the stored randomness, the
/// upper bound distributionally (stored times stochastically dominated by
/// level times independent functional samples).
pub fn check_bounds(
    decompositions: &[Decomposition],
    z_choices: &[f64],
    exp_integral_samples: &[f64],
) -> Result<BoundsReport, ReversalError> {
    let first = decompositions
        .first()
        .ok_or_else(|| ReversalError::InvalidParameter("no decompositions".into()))?;
    let levels = &first.levels;
    if z_choices.len() + 1 != levels.len() {
        return Err(ReversalError::InvalidParameter(format!(
            "need one z per transition: {} levels, {} z values",
            levels.len(),
            z_choices.len()
        )));
    }
    let mut lower_checked = 0;
    let mut lower_violations = 0;
    let mut vacuous = 0;
    for d in decompositions {
        if d.levels != *levels {
            return Err(ReversalError::InvalidParameter(
                "decompositions disagree on levels".into(),
            ));
        }
        for n in 0..z_choices.len() {
            let z = z_choices[n];
            if !(levels[n + 1] < z && z < levels[n]) {
                vacuous += 1;
                continue;
            }
            lower_checked += 1;
            let lower = if d.gamma_seq[n] >= z {
                match &d.segments[n] {
                    Some(seg) => {
                        let lvl = (levels[n + 1] / z).ln();
                        let idx = seg
                            .path
                            .values
                            .iter()
                            .position(|&v| v <= lvl)
                            .expect("stored segment crosses any higher level");
                        z * seg.integral[idx]
                    }
                    // Instantaneous passage cannot carry the indicator:
                    // gamma_n <= x_{n+1} < z contradicts gamma_n >= z.
                    None => unreachable!("indicator excludes degenerate segments"),
                }
            } else {
                0.0
            };
            if lower > d.u_values[n] {
                lower_violations += 1;
            }
        }
    }
    let mut upper = Vec::new();
    let mut upper_ok = true;
    for (n, &level) in levels.iter().enumerate() {
        let u_samples: Vec<f64> = decompositions.iter().map(|d| d.u_values[n]).collect();
        if u_samples.len() < 30 || exp_integral_samples.len() < 30 {
            continue;
        }
        let scaled: Vec<f64> = exp_integral_samples.iter().map(|&i| level * i).collect();
        let ks = stats::ks_one_sided(&u_samples, &scaled)?;
        // Violation of the dominance would be the scaled samples sitting
        // below the stored times.
        if ks.p_b_below_a <= 0.01 {
            upper_ok = false;
        }
        upper.push((n, ks));
    }
    let passed = lower_violations == 0 && upper_ok;
    Ok(BoundsReport { lower_checked, lower_violations, vacuous, upper, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckReport {
    pub ks: KsReport,
    pub n_resolved: usize,
    pub unresolved: usize,
    pub unresolved_fraction: f64,
}

/// Parameters for [`last_passage_identity_check`].
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheckParams {
    /// Level probed on the zero-start proxy paths.
    pub x: f64,
    /// Reference level for the relative-position draw.
    pub x1: f64,
    pub n: usize,
    pub x_small: f64,
    pub horizon: f64,
    pub tol: f64,
    pub depth_z: f64,
    pub step: f64,
}

/// Closing identity: last-passage times below `x` on zero-start proxy
/// paths against independent products
/// `(x/x1) * Gamma * (exponential functional)`. Fails when more than 1%
/// of the proxy paths cannot certify their last passage.
pub fn last_passage_identity_check(
    triplet: &LevyTriplet,
    params: IdentityCheckParams,
    master_seed: u64,
) -> Result<IdentityCheckReport, ReversalError> {
    let IdentityCheckParams { x, x1, n, x_small, horizon, tol, depth_z, step } = params;
    if !(0.0 < x && x <= x1) {
        return Err(ReversalError::InvalidParameter(format!(
            "need 0 < x <= x1, got x = {x}, x1 = {x1}"
        )));
    }
    let u_draws: Result<Vec<Option<f64>>, ReversalError> =
        parallel_replicates(master_seed, 0, n, |_, rng| {
            let path = simulate_from_zero(triplet, x_small, 1.0, horizon, step, rng)?;
            Ok(last_passage(&path, x))
        })
        .into_iter()
        .collect();
    let u_draws = u_draws?;
    let resolved: Vec<f64> = u_draws.iter().filter_map(|&u| u).collect();
    let unresolved = n - resolved.len();
    if unresolved * 100 > n {
        return Err(ReversalError::TooManyUnresolved { unresolved, n });
    }
    let products: Result<Vec<f64>, ReversalError> =
        parallel_replicates(master_seed, 1, n, |_, rng| {
            let gamma = sample_gamma(triplet, depth_z, step, rng)?;
            let i = sample_exp_integral(&triplet.negate(), tol, step, rng)?;
            Ok(x * gamma.ratio * i.value)
        })
        .into_iter()
        .collect();
    let products = products?;
    let ks = stats::ks_two_sample(&resolved, &products)?;
    Ok(IdentityCheckReport {
        ks,
        n_resolved: resolved.len(),
        unresolved,
        unresolved_fraction: unresolved as f64 / n as f64,
    })
}
