//! Integral tests for the lower envelope and the iterated-logarithm
//! scaling machinery: log-power test functions, tail models with
//! parametric wings, a dyadic-window convergence classifier, the
//! psi scale from the tail inverse, and the subordinator scaling
//! constants.
//!
//! The classifier integrates `F(t/f(t)) dt/t` over dyadic windows toward
//! the probed side and decides by the geometry of the window
//! contributions: clean geometric decay or flatness decide immediately,
//! otherwise the power-law growth exponent of the contributions is
//! fitted on a log-log scale (with a log-log-log refinement exactly on
//! the boundary), and anything straddling the decision band stays
//! inconclusive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expfun::TailEstimate;
use crate::lamperti::PssMpPath;
use crate::stats;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("test function is not increasing on its {0:?} window near t = {1}")]
    NotIncreasing(Side, f64),
    #[error("empirical tail queried at {0} beyond its grid and no wing is attached")]
    BeyondGrid(f64),
    #[error("wing fit rejected: R^2 = {0} below 0.99")]
    WingFitRejected(f64),
    #[error("psi domain violation: t = {0} inside [1/e, e] or nonpositive")]
    PsiDomain(f64),
    #[error("target level 1/{0} is not reachable on the tail grid")]
    PsiUnresolved(f64),
    #[error("bisection bracket exhausted: {0}")]
    BracketExhausted(String),
    #[error("empty certified window: no probe time usable on any path")]
    EmptyWindow,
}

/// Side of the time axis a test function or classification probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Zero,
    Infinity,
}

/// Log-power test function `f(t) = c t^a |log t|^b (log|log t|)^d`,
/// valid on a declared side; monotonicity is checked numerically on a
/// geometric probe grid at construction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestFunction {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub side: Side,
    /// `f(t)/t` increasing on the probe window (side condition flag).
    pub ratio_increasing: bool,
    /// `f(t)/t` decreasing on the probe window (side condition flag).
    pub ratio_decreasing: bool,
}

impl TestFunction {
    pub fn new(c: f64, a: f64, b: f64, d: f64, side: Side) -> Result<Self, EnvelopeError> {
        if !(c > 0.0) {
            return Err(EnvelopeError::InvalidParameter(format!("c = {c} must be > 0")));
        }
        let f = TestFunction { c, a, b, d, side, ratio_increasing: false, ratio_decreasing: false };
        let grid = f.probe_grid();
        let mut ratio_inc = true;
        let mut ratio_dec = true;
        for w in grid.windows(2) {
            let (f0, f1) = (f.eval(w[0]), f.eval(w[1]));
            if !(f1 >= f0 * (1.0 - 1e-12)) {
                return Err(EnvelopeError::NotIncreasing(side, w[0]));
            }
            let (r0, r1) = (f0 / w[0], f1 / w[1]);
            if r1 < r0 * (1.0 - 1e-12) {
                ratio_inc = false;
            }
            if r1 > r0 * (1.0 + 1e-12) {
                ratio_dec = false;
            }
        }
        Ok(TestFunction { ratio_increasing: ratio_inc, ratio_decreasing: ratio_dec, ..f })
    }

    fn probe_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.window();
        let n = 120;
        (0..=n)
            .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
            .collect()
    }

    /// Valid evaluation window for the declared side. The infinity side
    /// starts at 2^8 so that log-power functions with |b| up to ~5 have
    /// already turned monotone.
    pub fn window(&self) -> (f64, f64) {
        match self.side {
            Side::Zero => (2.0f64.powi(-61), 0.25),
            Side::Infinity => (2.0f64.powi(8), 2.0f64.powi(61)),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        match self.side {
            Side::Zero => t > 0.0 && t <= self.window().1,
            Side::Infinity => t >= self.window().0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = t.ln().abs();
        let mut v = self.c * t.powf(self.a);
        if self.b != 0.0 {
            v *= w.powf(self.b);
        }
        if self.d != 0.0 {
            v *= w.ln().powf(self.d);
        }
        v
    }
}

/// Parametric wing for extrapolating an empirical tail beyond its grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Wing {
    /// `F(u) = lambda u^{-gamma}` fitted on log-log scale.
    RegularVariation { gamma: f64, lambda: f64, r_squared: f64 },
    /// `-log F(u) = lambda u^{beta}` fitted on log/log-log scale.
    LogRegular { lambda: f64, beta: f64, r_squared: f64 },
}

impl Wing {
    fn survival(&self, u: f64) -> f64 {
        match *self {
            Wing::RegularVariation { gamma, lambda, .. } => {
                (lambda * u.powf(-gamma)).min(1.0)
            }
            Wing::LogRegular { lambda, beta, .. } => (-lambda * u.powf(beta)).exp(),
        }
    }
}

/// Least squares of y on x; returns (slope, intercept, r_squared).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

fn top_decile_points(estimate: &TailEstimate) -> Vec<(f64, f64)> {
    let n = estimate.thresholds.len();
    let start = n - (n / 10).max(3).min(n);
    estimate.thresholds[start..]
        .iter()
        .zip(estimate.survival[start..].iter())
        .filter(|&(&t, &s)| t > 0.0 && s > 0.0)
        .map(|(&t, &s)| (t, s))
        .collect()
}

/// Fit a regular-variation wing to the top decile of an empirical tail.
/// The fit is rejected when R^2 is below 0.99.
pub fn fit_regular_variation_wing(estimate: &TailEstimate) -> Result<Wing, EnvelopeError> {
    let pts = top_decile_points(estimate);
    if pts.len() < 3 {
        return Err(EnvelopeError::InvalidParameter(
            "too few positive tail points for a wing fit".into(),
        ));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    if r2 < 0.99 {
        return Err(EnvelopeError::WingFitRejected(r2));
    }
    Ok(Wing::RegularVariation { gamma: -slope, lambda: intercept.exp(), r_squared: r2 })
}

/// Fit a log-regular wing (`-log F = lambda u^beta`) to the top decile.
pub fn fit_log_regular_wing(estimate: &TailEstimate) -> Result<Wing, EnvelopeError> {
    let pts = top_decile_points(estimate);
    if pts.len() < 3 {
        return Err(EnvelopeError::InvalidParameter(
            "too few positive tail points for a wing fit".into(),
        ));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| (-p.1.ln()).ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    if r2 < 0.99 {
        return Err(EnvelopeError::WingFitRejected(r2));
    }
    Ok(Wing::LogRegular { lambda: intercept.exp(), beta: slope, r_squared: r2 })
}

/// Survival-function model feeding the integral tests.
#[derive(Debug, Clone)]
pub enum TailModel {
    /// Empirical tail; queries beyond the grid need an attached wing.
    Empirical { estimate: TailEstimate, wing: Option<Wing> },
    /// `F(u) ~ lambda u^{-gamma} (log u)^{log_power}`.
    RegularVariation { gamma: f64, lambda: f64, log_power: f64 },
    /// `-log F(u) ~ lambda u^{beta} (log u)^{log_power}`.
    LogRegular { lambda: f64, beta: f64, log_power: f64 },
}

impl TailModel {
    /// Survival probability at `u`. Clamped to `[0, 1]`; parametric
    /// models treat the slowly varying factor as 1 below `e`.
    pub fn survival(&self, u: f64) -> Result<f64, EnvelopeError> {
        if u <= 0.0 {
            return Ok(1.0);
        }
        match self {
            TailModel::Empirical { estimate, wing } => match estimate.survival_at(u) {
                Some(s) => Ok(s),
                None => match wing {
                    Some(w) => Ok(w.survival(u)),
                    None => Err(EnvelopeError::BeyondGrid(u)),
                },
            },
            TailModel::RegularVariation { gamma, lambda, log_power } => {
                let l = u.ln().max(1.0).powf(*log_power);
                Ok((lambda * u.powf(-gamma) * l).min(1.0))
            }
            TailModel::LogRegular { lambda, beta, log_power } => {
                let l = u.ln().max(1.0).powf(*log_power);
                Ok((-lambda * u.powf(*beta) * l).exp())
            }
        }
    }
}

/// Outcome of an integral-test classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Converges,
    Diverges,
    Inconclusive,
}

/// Classification verdict with per-window growth diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// `(window index, local growth exponent of the window contribution)`
    /// over the deep fitting range.
    pub slope_diagnostics: Vec<(f64, f64)>,
}

/// The integral-test integrand `F(t/f(t)) / t`.
pub fn integrand_at(
    tail: &TailModel,
    f: &TestFunction,
    t: f64,
) -> Result<f64, EnvelopeError> {
    if !f.contains(t) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "t = {t} outside the {:?}-side window",
            f.side
        )));
    }
    Ok(tail.survival(t / f.eval(t))? / t)
}

const WINDOW_MAX: i32 = 60;
const QUAD_NODES: usize = 24;

/// Contribution of one dyadic window `[lo, 2 lo]` to `int F(t/f) dt/t`,
/// by midpoint quadrature in the log coordinate.
fn window_contribution(
    tail: &TailModel,
    f: &TestFunction,
    lo: f64,
) -> Result<f64, EnvelopeError> {
    let ln2 = std::f64::consts::LN_2;
    let mut acc = 0.0;
    for j in 0..QUAD_NODES {
        let u = (j as f64 + 0.5) / QUAD_NODES as f64;
        let t = lo * 2.0f64.powf(u);
        acc += tail.survival(t / f.eval(t))?;
    }
    Ok(ln2 * acc / QUAD_NODES as f64)
}

/// Classify `int_{0+} F(t/f(t)) dt/t` by dyadic windows shrinking to 0,
/// per the decision rule in the module docs.
pub fn classify_at_zero(tail: &TailModel, f: &TestFunction) -> Result<Verdict, EnvelopeError> {
    if f.side != Side::Zero {
        return Err(EnvelopeError::InvalidParameter(
            "test function declared for the infinity side".into(),
        ));
    }
    let k_min = 2; // first window below the 0.25 window edge
    let contributions: Result<Vec<f64>, EnvelopeError> = (k_min..=WINDOW_MAX)
        .map(|k| window_contribution(tail, f, 2.0f64.powi(-k - 1)))
        .collect();
    Ok(decide(&contributions?, k_min))
}

/// Mirror classification over windows growing to infinity.
pub fn classify_at_infinity(
    tail: &TailModel,
    g: &TestFunction,
) -> Result<Verdict, EnvelopeError> {
    if g.side != Side::Infinity {
        return Err(EnvelopeError::InvalidParameter(
            "test function declared for the zero side".into(),
        ));
    }
    let k_min = 8; // first window above the window edge 2^8
    let contributions: Result<Vec<f64>, EnvelopeError> = (k_min..=WINDOW_MAX)
        .map(|k| window_contribution(tail, g, 2.0f64.powi(k)))
        .collect();
    Ok(decide(&contributions?, k_min))
}

/// Decision rule over dyadic-window contributions: geometric thresholds
/// 0.95/0.999 with 10-window persistence decide the clean regimes, a
/// log-log slope fit of the deep windows decides the power regime, and a
/// log-log-log refinement decides the exact boundary; anything inside the
/// band stays inconclusive.
fn decide(contributions: &[f64], k_min: i32) -> Verdict {
    let n = contributions.len();
    let last10 = &contributions[n - 10..];
    // Vanished integrand: the remaining mass is zero to double precision.
    if last10.iter().all(|&c| c < 1e-300) {
        return Verdict { outcome: Outcome::Converges, slope_diagnostics: Vec::new() };
    }
    if last10.iter().any(|&c| !c.is_finite()) {
        return Verdict { outcome: Outcome::Inconclusive, slope_diagnostics: Vec::new() };
    }
    let ratios: Vec<f64> = last10.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().all(|&r| r < 0.95) {
        return Verdict { outcome: Outcome::Converges, slope_diagnostics: Vec::new() };
    }
    if ratios.iter().all(|&r| r >= 0.999) {
        return Verdict { outcome: Outcome::Diverges, slope_diagnostics: Vec::new() };
    }
    // Power regime: fit ln c_k against ln k over the deep half.
    let fit_start = n / 2;
    let idx: Vec<f64> = (fit_start..n)
        .map(|i| ((i as i32 + k_min) as f64).ln())
        .collect();
    let vals: Vec<f64> = contributions[fit_start..].iter().map(|&c| c.max(1e-300).ln()).collect();
    let (slope, _, _) = linear_fit(&idx, &vals);
    let p_hat = -slope;
    let mut diagnostics = Vec::with_capacity(n - fit_start - 1);
    for i in fit_start..n - 1 {
        let k0 = (i as i32 + k_min) as f64;
        let local = -(contributions[i + 1].max(1e-300).ln()
            - contributions[i].max(1e-300).ln())
            / ((k0 + 1.0).ln() - k0.ln());
        diagnostics.push((k0, local));
    }
    let outcome = if p_hat > 1.1 {
        Outcome::Converges
    } else if p_hat < 0.9 {
        Outcome::Diverges
    } else {
        // Exactly critical power: decide by the log-log-log exponent of
        // k * c_k.
        let y2: Vec<f64> = (fit_start..n)
            .map(|i| {
                let k = (i as i32 + k_min) as f64;
                (k * contributions[i].max(1e-300)).ln()
            })
            .collect();
        let x2: Vec<f64> = (fit_start..n)
            .map(|i| ((i as i32 + k_min) as f64).ln().ln())
            .collect();
        let (slope2, _, _) = linear_fit(&x2, &y2);
        let d_hat = -slope2;
        if d_hat > 1.3 {
            Outcome::Converges
        } else if d_hat < 0.7 {
            Outcome::Diverges
        } else {
            Outcome::Inconclusive
        }
    };
    Verdict { outcome, slope_diagnostics: diagnostics }
}

/// Inner infimum of the psi definition on an arbitrary survival
/// function: `inf{s : F(s) < level}` by bracket doubling and bisection.
fn inf_survival_below<F>(survival: F, level: f64) -> Result<f64, EnvelopeError>
where
    F: Fn(f64) -> Result<f64, EnvelopeError>,
{
    let mut hi = 1.0f64;
    let mut steps = 0;
    while survival(hi)? >= level {
        hi *= 2.0;
        steps += 1;
        if steps > 2000 {
            return Err(EnvelopeError::BracketExhausted(format!(
                "survival never fell below {level}"
            )));
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        lo = 1.0;
        let mut halvings = 0;
        while survival(lo)? < level {
            lo /= 2.0;
            halvings += 1;
            if halvings > 2000 {
                return Err(EnvelopeError::BracketExhausted(format!(
                    "survival below {level} arbitrarily close to 0"
                )));
            }
        }
        hi = lo * 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival(mid)? < level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn psi_domain_check(t: f64) -> Result<f64, EnvelopeError> {
    if !(t > 0.0) {
        return Err(EnvelopeError::PsiDomain(t));
    }
    let w = t.ln().abs();
    // |log t| <= 1 makes the level 1/|log t| >= 1 vacuous.
    if w <= 1.0 {
        return Err(EnvelopeError::PsiDomain(t));
    }
    Ok(w)
}

/// The envelope scale `psi(t) = t / inf{s : 1/F(s) > |log t|}`.
///
/// Closed form for the trivially-slowly-varying log-regular model,
/// monotone bisection otherwise. The band `[1/e, e]` is excluded.
pub fn psi(tail: &TailModel, t: f64) -> Result<f64, EnvelopeError> {
    let w = psi_domain_check(t)?;
    let s_star = psi_inner_inf(tail, w)?;
    Ok(t / s_star)
}

/// Inner infimum of the psi definition at tail level `1/w`.
fn psi_inner_inf(tail: &TailModel, w: f64) -> Result<f64, EnvelopeError> {
    match tail {
        TailModel::LogRegular { lambda, beta, log_power } if *log_power == 0.0 => {
            Ok((w.ln() / lambda).powf(1.0 / beta))
        }
        TailModel::Empirical { estimate, .. } => {
            if let Some(&first) = estimate.thresholds.first() {
                let f0 = estimate.survival[0];
                if f0 > 0.0 && 1.0 / f0 > w && first > 0.0 {
                    return Err(EnvelopeError::PsiUnresolved(w));
                }
            }
            inf_survival_below(|s| tail.survival(s), 1.0 / w)
        }
        _ => inf_survival_below(|s| tail.survival(s), 1.0 / w),
    }
}

/// Psi on a plain survival closure (for exact analytic tails).
pub fn psi_from_survival<F>(survival: F, t: f64) -> Result<f64, EnvelopeError>
where
    F: Fn(f64) -> f64,
{
    let w = psi_domain_check(t)?;
    let s_star = inf_survival_below(|s| Ok(survival(s)), 1.0 / w)?;
    Ok(t / s_star)
}

/// The subordinator scaling `t * phi(log|log t|) / log|log t|` (index-1
/// normalization). Requires `t > e` or `t < 1/e`.
pub fn rivero_scaling<F>(phi: F, t: f64) -> Result<f64, EnvelopeError>
where
    F: Fn(f64) -> f64,
{
    let w = psi_domain_check(t)?;
    let ll = w.ln();
    Ok(t * phi(ll) / ll)
}

/// The ratio `psi(t) / rivero_scaling(t)` computed entirely from
/// `|log t|`, for probing far beyond the floating-point range of `t`
/// itself (the `t` factors cancel algebraically).
pub fn rivero_consistency_ratio<F>(
    tail: &TailModel,
    phi: F,
    abs_log_t: f64,
) -> Result<f64, EnvelopeError>
where
    F: Fn(f64) -> f64,
{
    if !(abs_log_t > 1.0) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "|log t| = {abs_log_t} must exceed 1"
        )));
    }
    let s_star = psi_inner_inf(tail, abs_log_t)?;
    let ll = abs_log_t.ln();
    Ok(ll / (s_star * phi(ll)))
}

/// The iterated-logarithm constant `alpha^{beta/alpha} (1-beta)^{(1-beta)/alpha}`.
pub fn lil_constant(beta: f64, alpha: f64) -> f64 {
    alpha.powf(beta / alpha) * (1.0 - beta).powf((1.0 - beta) / alpha)
}

/// Cross-path distribution of per-path minima of `X_t / scale(t)` over a
/// geometric probe grid.
#[derive(Debug, Clone, Serialize)]
pub struct LiminfStats {
    pub minima: Vec<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Paths contributing no probe inside their certified window.
    pub skipped: usize,
}

/// Measure the empirical lower envelope: for each path, the minimum of
/// `X_t / scale(t)` over the geometric grid `{hi r^{-k}}` (side zero) or
/// `{lo r^k}` (side infinity) inside `[window_lo, window_hi]`, restricted
/// to probe times the path resolves (after its first grid point, before
/// its horizon).
pub fn empirical_liminf<F>(
    paths: &[PssMpPath],
    scale: F,
    side: Side,
    grid_ratio: f64,
    window: (f64, f64),
) -> Result<LiminfStats, EnvelopeError>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = window;
    if !(grid_ratio > 1.0) || !(0.0 < lo && lo < hi) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "grid_ratio {grid_ratio} must exceed 1 and window ({lo}, {hi}) must be ordered"
        )));
    }
    let mut probes = Vec::new();
    match side {
        Side::Zero => {
            let mut t = hi;
            while t >= lo {
                probes.push(t);
                t /= grid_ratio;
            }
        }
        Side::Infinity => {
            let mut t = lo;
            while t <= hi {
                probes.push(t);
                t *= grid_ratio;
            }
        }
    }
    let mut minima = Vec::with_capacity(paths.len());
    let mut skipped = 0;
    for p in paths {
        let resolved_from = p.times.get(1).copied().unwrap_or(f64::INFINITY);
        let mut min_ratio = f64::INFINITY;
        for &t in &probes {
            if t < resolved_from || t > p.horizon() {
                continue;
            }
            let s = scale(t);
            if !(s > 0.0) {
                return Err(EnvelopeError::InvalidParameter(format!(
                    "scale({t}) = {s} must be positive"
                )));
            }
            if let Some(v) = p.value_at(t) {
                min_ratio = min_ratio.min(v / s);
            }
        }
        if min_ratio.is_finite() {
            minima.push(min_ratio);
        } else {
            skipped += 1;
        }
    }
    if minima.is_empty() {
        return Err(EnvelopeError::EmptyWindow);
    }
    Ok(LiminfStats {
        median: stats::median(&minima),
        q25: stats::quantile(&minima, 0.25),
        q75: stats::quantile(&minima, 0.75),
        minima,
        skipped,
    })
}

/// Asymptotic-regime power-tail integrand `lambda (t/g(t))^{-gamma} / t`
/// without the probability cap, i.e. [`integrand_at`] with a pure
/// regular-variation tail continued through its saturation point. The two
/// agree exactly wherever `t/g(t) >= lambda^{1/gamma}`.
pub fn power_tail_integrand(
    gamma: f64,
    lambda: f64,
    g: &TestFunction,
    t: f64,
) -> Result<f64, EnvelopeError> {
    if !g.contains(t) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "t = {t} outside the {:?}-side window",
            g.side
        )));
    }
    Ok(lambda * (t / g.eval(t)).powf(-gamma) / t)
}

/// The classical transient-dimension lower-envelope integrand
/// `(f(t)/t)^{(delta-2)/4} / t` in the dimension-`delta` normalization.
pub fn bessel_de_integrand(
    delta: f64,
    f: &TestFunction,
    t: f64,
) -> Result<f64, EnvelopeError> {
    if !(delta > 2.0) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "delta = {delta} must exceed 2"
        )));
    }
    if !f.contains(t) {
        return Err(EnvelopeError::InvalidParameter(format!(
            "t = {t} outside the {:?}-side window",
            f.side
        )));
    }
    Ok((f.eval(t) / t).powf((delta - 2.0) / 4.0) / t)
}

/// Companion test function for the index change: the integrand above
/// equals the power-tail integrand `F(t/g(t))/t` with
/// `gamma = (delta-2)/2` and `g = sqrt(t f(t))`, which stays inside the
/// log-power family.
pub fn de_companion_function(f: &TestFunction) -> Result<TestFunction, EnvelopeError> {
    TestFunction::new(f.c.sqrt(), (f.a + 1.0) / 2.0, f.b / 2.0, f.d / 2.0, f.side)
}
