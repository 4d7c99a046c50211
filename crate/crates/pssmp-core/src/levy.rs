//! Driving Levy processes: parametric triplets, exact-in-law path
//! simulation, analytic characteristics and first-passage detection.
//!
//! A process is described by a [`LevyTriplet`]: linear drift, Brownian
//! variance per unit time, a jump component from the parametric
//! [`JumpSpec`] menu, and a kill rate (storable, never simulated). Paths
//! are produced on a nominal grid refined so that every compound-Poisson
//! jump epoch is a grid point with the jump applied exactly; Gaussian and
//! tempered-stable increments are sampled exactly in law per step, so
//! there is no Euler drift bias, only grid-resolution effects in
//! downstream integrals and passage times.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;

/// Cap on rejection trials when exponentially tilting a stable increment.
pub const STABLE_REJECTION_CAP: u32 = 1_000_000;

#[derive(Debug, Error)]
pub enum LevyError {
    #[error("mean undefined: {0}")]
    MeanUndefined(String),
    #[error("killed process: kill rate {0} > 0")]
    KilledProcess(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("horizon and step must be positive: horizon={horizon}, step={step}")]
    BadGrid { horizon: f64, step: f64 },
    #[error("first-passage level must be negative, got {0}")]
    NonNegativeLevel(f64),
    #[error("tempered-stable tilt rejection cap of {0} trials exceeded")]
    RejectionCapExceeded(u32),
}

/// Law of a single compound-Poisson jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JumpLaw {
    /// Positive jump, exponential with the given rate.
    Exponential { rate: f64 },
    /// Negative jump, minus an exponential with the given rate.
    NegExponential { rate: f64 },
    /// Deterministic jump of the given (nonzero) size.
    PointMass { value: f64 },
    /// Positive exponential jump with probability `p_up`, negative
    /// exponential otherwise.
    TwoSidedExponential { rate_up: f64, rate_down: f64, p_up: f64 },
}

impl JumpLaw {
    fn validate(&self) -> Result<(), LevyError> {
        let bad = |msg: String| Err(LevyError::InvalidParameter(msg));
        match *self {
            JumpLaw::Exponential { rate } | JumpLaw::NegExponential { rate } => {
                if rate <= 0.0 {
                    return bad(format!("exponential jump rate {rate} must be > 0"));
                }
            }
            JumpLaw::PointMass { value } => {
                if value == 0.0 || !value.is_finite() {
                    return bad("point-mass jump must be finite and nonzero".into());
                }
            }
            JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                if rate_up <= 0.0 || rate_down <= 0.0 {
                    return bad("two-sided exponential rates must be > 0".into());
                }
                if !(0.0..=1.0).contains(&p_up) {
                    return bad(format!("p_up {p_up} must lie in [0,1]"));
                }
            }
        }
        Ok(())
    }

    /// Mean jump size; `None` for an invalid parameterization.
    fn mean(&self) -> Option<f64> {
        match *self {
            JumpLaw::Exponential { rate } => (rate > 0.0).then(|| 1.0 / rate),
            JumpLaw::NegExponential { rate } => (rate > 0.0).then(|| -1.0 / rate),
            JumpLaw::PointMass { value } => Some(value),
            JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                (rate_up > 0.0 && rate_down > 0.0)
                    .then(|| p_up / rate_up - (1.0 - p_up) / rate_down)
            }
        }
    }

    /// `E exp(-theta J)`, or `None` when the exponential moment diverges.
    fn laplace(&self, theta: f64) -> Option<f64> {
        match *self {
            JumpLaw::Exponential { rate } => {
                (theta > -rate).then(|| rate / (rate + theta))
            }
            JumpLaw::NegExponential { rate } => {
                (theta < rate).then(|| rate / (rate - theta))
            }
            JumpLaw::PointMass { value } => Some((-theta * value).exp()),
            JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                let up = if p_up > 0.0 {
                    if theta > -rate_up {
                        Some(p_up * rate_up / (rate_up + theta))
                    } else {
                        None
                    }
                } else {
                    Some(0.0)
                };
                let down = if p_up < 1.0 {
                    if theta < rate_down {
                        Some((1.0 - p_up) * rate_down / (rate_down - theta))
                    } else {
                        None
                    }
                } else {
                    Some(0.0)
                };
                Some(up? + down?)
            }
        }
    }

    fn mirrored(&self) -> JumpLaw {
        match *self {
            JumpLaw::Exponential { rate } => JumpLaw::NegExponential { rate },
            JumpLaw::NegExponential { rate } => JumpLaw::Exponential { rate },
            JumpLaw::PointMass { value } => JumpLaw::PointMass { value: -value },
            JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                JumpLaw::TwoSidedExponential {
                    rate_up: rate_down,
                    rate_down: rate_up,
                    p_up: 1.0 - p_up,
                }
            }
        }
    }

    fn has_negative_support(&self) -> bool {
        match *self {
            JumpLaw::Exponential { .. } => false,
            JumpLaw::NegExponential { .. } => true,
            JumpLaw::PointMass { value } => value < 0.0,
            JumpLaw::TwoSidedExponential { p_up, .. } => p_up < 1.0,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            JumpLaw::NegExponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                -e / rate
            }
            JumpLaw::PointMass { value } => value,
            JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                let u: f64 = rng.random();
                let e: f64 = Exp1.sample(rng);
                if u < p_up {
                    e / rate_up
                } else {
                    -e / rate_down
                }
            }
        }
    }
}

/// Jump component of a Levy triplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JumpSpec {
    None,
    /// Finite-activity jumps at the given rate with the given law.
    CompoundPoisson { rate: f64, law: JumpLaw },
    /// One-sided (positive) tempered-stable subordinator component with
    /// Bernstein exponent `scale * ((lambda + theta)^beta - theta^beta)`.
    TemperedStable { beta: f64, theta: f64, scale: f64 },
    /// The negative of a tempered-stable subordinator (all jumps down).
    NegatedTemperedStable { beta: f64, theta: f64, scale: f64 },
}

impl JumpSpec {
    fn validate(&self) -> Result<(), LevyError> {
        match *self {
            JumpSpec::None => Ok(()),
            JumpSpec::CompoundPoisson { rate, law } => {
                if rate <= 0.0 {
                    return Err(LevyError::InvalidParameter(format!(
                        "compound-Poisson rate {rate} must be > 0"
                    )));
                }
                law.validate()
            }
            JumpSpec::TemperedStable { beta, theta, scale }
            | JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                if !(0.0 < beta && beta < 1.0) {
                    return Err(LevyError::InvalidParameter(format!(
                        "tempered-stable beta {beta} must lie in (0,1)"
                    )));
                }
                if theta <= 0.0 || scale <= 0.0 {
                    return Err(LevyError::InvalidParameter(format!(
                        "tempered-stable theta {theta} and scale {scale} must be > 0"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Expected jump contribution per unit time, or an error when the
    /// parameters put the mean out of reach.
    fn mean_rate(&self) -> Result<f64, LevyError> {
        match *self {
            JumpSpec::None => Ok(0.0),
            JumpSpec::CompoundPoisson { rate, law } => law
                .mean()
                .map(|m| rate * m)
                .ok_or_else(|| LevyError::MeanUndefined("invalid jump-law parameters".into())),
            JumpSpec::TemperedStable { beta, theta, scale } => {
                if theta <= 0.0 {
                    // The untempered stable limit has infinite mean.
                    return Err(LevyError::MeanUndefined(
                        "stable jumps without tempering have infinite mean".into(),
                    ));
                }
                Ok(scale * beta * theta.powf(beta - 1.0))
            }
            JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                if theta <= 0.0 {
                    return Err(LevyError::MeanUndefined(
                        "stable jumps without tempering have infinite mean".into(),
                    ));
                }
                Ok(-scale * beta * theta.powf(beta - 1.0))
            }
        }
    }

    /// Jump part of the Levy-Khintchine exponent at `-theta`, i.e. the
    /// log of `E exp(-theta (jump component at time 1))`; `None` when the
    /// exponential moment diverges.
    fn log_laplace(&self, theta: f64) -> Option<f64> {
        match *self {
            JumpSpec::None => Some(0.0),
            JumpSpec::CompoundPoisson { rate, law } => {
                law.laplace(theta).map(|m| rate * (m - 1.0))
            }
            JumpSpec::TemperedStable { beta, theta: tilt, scale } => {
                (theta >= -tilt).then(|| -scale * ((theta + tilt).powf(beta) - tilt.powf(beta)))
            }
            JumpSpec::NegatedTemperedStable { beta, theta: tilt, scale } => {
                (theta <= tilt).then(|| -scale * ((tilt - theta).powf(beta) - tilt.powf(beta)))
            }
        }
    }

    fn mirrored(&self) -> JumpSpec {
        match *self {
            JumpSpec::None => JumpSpec::None,
            JumpSpec::CompoundPoisson { rate, law } => JumpSpec::CompoundPoisson {
                rate,
                law: law.mirrored(),
            },
            JumpSpec::TemperedStable { beta, theta, scale } => {
                JumpSpec::NegatedTemperedStable { beta, theta, scale }
            }
            JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                JumpSpec::TemperedStable { beta, theta, scale }
            }
        }
    }

    /// Whether the jump component can move the path downward.
    pub fn has_negative_jumps(&self) -> bool {
        match *self {
            JumpSpec::None | JumpSpec::TemperedStable { .. } => false,
            JumpSpec::NegatedTemperedStable { .. } => true,
            JumpSpec::CompoundPoisson { law, .. } => law.has_negative_support(),
        }
    }
}

/// Value of a moment generating function, which may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mgf {
    Finite(f64),
    Infinite,
}

impl Mgf {
    pub fn finite(self) -> Option<f64> {
        match self {
            Mgf::Finite(v) => Some(v),
            Mgf::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Mgf::Infinite)
    }
}

/// Outcome of the convergence-condition check: the process must be
/// unkilled, non-lattice, with finite jump mean and strictly positive
/// drift of the whole process.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionH {
    pub holds: bool,
    pub m: Option<f64>,
    pub reasons: Vec<String>,
}

/// Parametric description of a Levy process: drift per unit time,
/// Brownian variance per unit time, jump component, kill rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub drift: f64,
    pub gaussian_var: f64,
    pub jumps: JumpSpec,
    pub kill_rate: f64,
}

impl LevyTriplet {
    pub fn new(
        drift: f64,
        gaussian_var: f64,
        jumps: JumpSpec,
        kill_rate: f64,
    ) -> Result<Self, LevyError> {
        let t = LevyTriplet { drift, gaussian_var, jumps, kill_rate };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        if !self.drift.is_finite() {
            return Err(LevyError::InvalidParameter("drift must be finite".into()));
        }
        if self.gaussian_var < 0.0 || !self.gaussian_var.is_finite() {
            return Err(LevyError::InvalidParameter(format!(
                "gaussian_var {} must be >= 0",
                self.gaussian_var
            )));
        }
        if self.kill_rate < 0.0 || !self.kill_rate.is_finite() {
            return Err(LevyError::InvalidParameter(format!(
                "kill_rate {} must be >= 0",
                self.kill_rate
            )));
        }
        self.jumps.validate()
    }

    /// Brownian motion with drift, no jumps.
    pub fn brownian(drift: f64, gaussian_var: f64) -> Self {
        LevyTriplet { drift, gaussian_var, jumps: JumpSpec::None, kill_rate: 0.0 }
    }

    /// Deterministic linear drift.
    pub fn pure_drift(drift: f64) -> Self {
        Self::brownian(drift, 0.0)
    }

    /// Drift plus compound-Poisson jumps.
    pub fn with_jumps(drift: f64, gaussian_var: f64, rate: f64, law: JumpLaw) -> Self {
        LevyTriplet {
            drift,
            gaussian_var,
            jumps: JumpSpec::CompoundPoisson { rate, law },
            kill_rate: 0.0,
        }
    }

    /// The triplet of the negated process.
    pub fn negate(&self) -> LevyTriplet {
        LevyTriplet {
            drift: -self.drift,
            gaussian_var: self.gaussian_var,
            jumps: self.jumps.mirrored(),
            kill_rate: self.kill_rate,
        }
    }

    /// Exact mean of the process at unit time. Errors for killed
    /// processes and for jump laws without a finite mean.
    pub fn mean_at_unit_time(&self) -> Result<f64, LevyError> {
        if self.kill_rate > 0.0 {
            return Err(LevyError::KilledProcess(self.kill_rate));
        }
        Ok(self.drift + self.jumps.mean_rate()?)
    }

    /// `E exp(-theta xi_1)` in closed form per jump component.
    ///
    /// For a killed triplet the unit-time survival factor
    /// `exp(-kill_rate)` is included, matching the killed
    /// Levy-Khintchine exponent.
    pub fn mgf_at(&self, theta: f64) -> Mgf {
        let jump_part = match self.jumps.log_laplace(theta) {
            Some(v) => v,
            None => return Mgf::Infinite,
        };
        let log_mgf = -self.kill_rate - theta * self.drift
            + theta * theta * self.gaussian_var / 2.0
            + jump_part;
        Mgf::Finite(log_mgf.exp())
    }

    /// Check the entrance-law convergence condition: unkilled, finite
    /// jump mean, strictly positive mean at unit time, non-lattice.
    ///
    /// Lattice detection is syntactic: point-mass jumps with no drift
    /// and no Gaussian part.
    pub fn condition_h(&self) -> ConditionH {
        let mut reasons = Vec::new();
        if self.kill_rate > 0.0 {
            reasons.push(format!("killed process (kill rate {})", self.kill_rate));
        }
        let m = match self.jumps.mean_rate() {
            Ok(jump_mean) => Some(self.drift + jump_mean),
            Err(e) => {
                reasons.push(format!("jump mean not finite: {e}"));
                None
            }
        };
        if let Some(m) = m {
            if !(m > 0.0) {
                reasons.push(format!("mean at unit time m = {m} is not strictly positive"));
            }
        }
        if self.drift == 0.0 && self.gaussian_var == 0.0 {
            if let JumpSpec::CompoundPoisson { law: JumpLaw::PointMass { .. }, .. } = self.jumps {
                reasons.push(
                    "lattice law: point-mass jumps with no drift and no Gaussian part".into(),
                );
            }
        }
        ConditionH { holds: reasons.is_empty(), m, reasons }
    }

    /// Whether the process has downward jumps (its negation has upward).
    pub fn has_negative_jumps(&self) -> bool {
        self.jumps.has_negative_jumps()
    }

    /// Compact one-line form used in CSV artifact headers.
    pub fn fingerprint(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for LevyTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "drift={} var={} kill={} jumps=",
            self.drift, self.gaussian_var, self.kill_rate
        )?;
        match self.jumps {
            JumpSpec::None => write!(f, "none"),
            JumpSpec::CompoundPoisson { rate, law } => write!(f, "cp(rate={rate},law={law:?})"),
            JumpSpec::TemperedStable { beta, theta, scale } => {
                write!(f, "ts(beta={beta},theta={theta},scale={scale})")
            }
            JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                write!(f, "neg_ts(beta={beta},theta={theta},scale={scale})")
            }
        }
    }
}

/// A discretized cadlag sample path on a refined grid.
///
/// The path value on `[times[i], times[i+1])` is `values[i]`; jumps are
/// applied exactly at their epochs, which are always grid points, and the
/// indices where this happened are listed in `jump_marks`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jump_marks: Vec<usize>,
    pub step_nominal: f64,
}

/// Resolved first passage of a path below a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassage {
    pub index: usize,
    pub time: f64,
    /// `value - level`, nonpositive at a detected crossing.
    pub overshoot: f64,
}

impl LevyPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_time(&self) -> f64 {
        *self.times.last().expect("empty path")
    }

    pub fn terminal_value(&self) -> f64 {
        *self.values.last().expect("empty path")
    }

    /// Left-step evaluation: the value in force at time `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 || t > self.terminal_time() {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        Some(self.values[i - 1])
    }

    pub fn is_jump_index(&self, index: usize) -> bool {
        self.jump_marks.binary_search(&index).is_ok()
    }

    /// First grid index where the path value is at or below `level < 0`.
    pub fn first_passage_below(&self, level: f64) -> Result<Option<FirstPassage>, LevyError> {
        if level >= 0.0 {
            return Err(LevyError::NonNegativeLevel(level));
        }
        for (i, &v) in self.values.iter().enumerate() {
            if v <= level {
                return Ok(Some(FirstPassage {
                    index: i,
                    time: self.times[i],
                    overshoot: v - level,
                }));
            }
        }
        Ok(None)
    }
}

/// One grid point emitted by the streaming simulator.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub t: f64,
    pub value: f64,
    pub jumped: bool,
}

/// Streaming exact-in-law path simulator.
///
/// Yields successive grid points at nominal spacing `step`, refined by
/// compound-Poisson jump epochs. Deterministic given the triplet, step
/// and generator state; unbounded in time, so callers impose their own
/// stopping rules.
pub struct PathGenerator<'r> {
    triplet: LevyTriplet,
    step: f64,
    rng: &'r mut Stream,
    t: f64,
    value: f64,
    next_nominal_index: u64,
    /// Pending compound-Poisson jump: (epoch, size).
    next_jump: Option<(f64, f64)>,
}

impl<'r> PathGenerator<'r> {
    pub fn new(triplet: &LevyTriplet, step: f64, rng: &'r mut Stream) -> Result<Self, LevyError> {
        triplet.validate()?;
        if triplet.kill_rate > 0.0 {
            return Err(LevyError::KilledProcess(triplet.kill_rate));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(LevyError::BadGrid { horizon: f64::NAN, step });
        }
        let mut gen = PathGenerator {
            triplet: *triplet,
            step,
            rng,
            t: 0.0,
            value: 0.0,
            next_nominal_index: 1,
            next_jump: None,
        };
        gen.draw_next_jump(0.0);
        Ok(gen)
    }

    fn draw_next_jump(&mut self, from: f64) {
        if let JumpSpec::CompoundPoisson { rate, law } = self.triplet.jumps {
            let gap: f64 = Exp1.sample(self.rng);
            let epoch = from + gap / rate;
            let size = law.sample(self.rng);
            self.next_jump = Some((epoch, size));
        }
    }

    /// Diffusive (Gaussian + tempered-stable + drift) increment over `dt`.
    fn diffusive_increment(&mut self, dt: f64) -> Result<f64, LevyError> {
        if dt <= 0.0 {
            return Ok(0.0);
        }
        let mut inc = self.triplet.drift * dt;
        if self.triplet.gaussian_var > 0.0 {
            let z: f64 = StandardNormal.sample(self.rng);
            inc += (self.triplet.gaussian_var * dt).sqrt() * z;
        }
        match self.triplet.jumps {
            JumpSpec::TemperedStable { beta, theta, scale } => {
                inc += sample_tempered_stable_increment(beta, theta, scale, dt, self.rng)?;
            }
            JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                inc -= sample_tempered_stable_increment(beta, theta, scale, dt, self.rng)?;
            }
            _ => {}
        }
        Ok(inc)
    }

    /// Advance to the next grid point (nominal or jump epoch).
    pub fn next_point(&mut self) -> Result<GridPoint, LevyError> {
        let nominal = self.next_nominal_index as f64 * self.step;
        let (target, jump_now) = match self.next_jump {
            Some((epoch, _)) if epoch < nominal => (epoch, true),
            Some((epoch, _)) if epoch == nominal => (nominal, true),
            _ => (nominal, false),
        };
        let inc = self.diffusive_increment(target - self.t)?;
        self.value += inc;
        let mut jumped = false;
        if jump_now {
            let (_, size) = self.next_jump.expect("jump pending");
            self.value += size;
            jumped = true;
            self.draw_next_jump(target);
        }
        if target >= nominal {
            self.next_nominal_index += 1;
        }
        self.t = target;
        Ok(GridPoint { t: self.t, value: self.value, jumped })
    }

    /// Advance to an exact time at or before the next event; used to land
    /// exactly on a horizon. Does not consume pending jumps.
    pub fn step_to(&mut self, target: f64) -> Result<GridPoint, LevyError> {
        debug_assert!(target >= self.t);
        let inc = self.diffusive_increment(target - self.t)?;
        self.value += inc;
        self.t = target;
        Ok(GridPoint { t: self.t, value: self.value, jumped: false })
    }

    /// Time of the next event the generator would emit.
    pub fn peek_next_time(&self) -> f64 {
        let nominal = self.next_nominal_index as f64 * self.step;
        match self.next_jump {
            Some((epoch, _)) if epoch < nominal => epoch,
            _ => nominal,
        }
    }
}

/// Standard one-sided stable variate with Laplace transform
/// `exp(-lambda^beta)`, by the polar (Kanter) construction.
pub fn sample_positive_stable<R: Rng>(beta: f64, rng: &mut R) -> f64 {
    debug_assert!(0.0 < beta && beta < 1.0);
    let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12) * PI;
    let w: f64 = {
        let e: f64 = Exp1.sample(rng);
        e.max(1e-300)
    };
    let s1 = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let s2 = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    s1 * s2
}

/// Exact-in-law increment of a tempered-stable subordinator over `dt`:
/// a stable(beta) proposal scaled to `(scale*dt)^(1/beta)`, accepted with
/// probability `exp(-theta * x)` (the normalizing tilt constant cancels).
pub fn sample_tempered_stable_increment<R: Rng>(
    beta: f64,
    theta: f64,
    scale: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64, LevyError> {
    let unit = (scale * dt).powf(1.0 / beta);
    for _ in 0..STABLE_REJECTION_CAP {
        let x = unit * sample_positive_stable(beta, rng);
        let u: f64 = rng.random();
        if u <= (-theta * x).exp() {
            return Ok(x);
        }
    }
    Err(LevyError::RejectionCapExceeded(STABLE_REJECTION_CAP))
}

/// Simulate a path on `[0, horizon]` at nominal spacing `step`.
///
/// The grid always contains 0 and `horizon`; every compound-Poisson jump
/// epoch inside the horizon is a grid point with the jump applied there.
/// Bit-identical output for identical `(triplet, horizon, step, seed)`.
pub fn simulate_path(
    triplet: &LevyTriplet,
    horizon: f64,
    step: f64,
    rng: &mut Stream,
) -> Result<LevyPath, LevyError> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(LevyError::BadGrid { horizon, step });
    }
    let mut gen = PathGenerator::new(triplet, step, rng)?;
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut jump_marks = Vec::new();
    loop {
        if gen.peek_next_time() >= horizon {
            // Jump epochs are continuous draws, so landing exactly on the
            // horizon has probability zero; cut the last segment there.
            let p = gen.step_to(horizon)?;
            times.push(p.t);
            values.push(p.value);
            break;
        }
        let p = gen.next_point()?;
        if p.jumped {
            jump_marks.push(times.len());
        }
        times.push(p.t);
        values.push(p.value);
    }
    Ok(LevyPath { times, values, jump_marks, step_nominal: step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats;

    fn bessel6_xi() -> LevyTriplet {
        LevyTriplet::brownian(4.0, 4.0)
    }

    #[test]
    fn mean_no_jumps_is_drift() {
        assert_eq!(bessel6_xi().mean_at_unit_time().unwrap(), 4.0);
    }

    #[test]
    fn mean_compound_poisson() {
        let t = LevyTriplet::with_jumps(1.0, 0.0, 2.0, JumpLaw::NegExponential { rate: 1.0 });
        assert_eq!(t.mean_at_unit_time().unwrap(), -1.0);
    }

    #[test]
    fn mean_tempered_stable_closed_form() {
        // d/d lambda of (lambda+1)^(1/2) - 1 at 0 is 1/2.
        let t = LevyTriplet {
            drift: 0.0,
            gaussian_var: 0.0,
            jumps: JumpSpec::TemperedStable { beta: 0.5, theta: 1.0, scale: 1.0 },
            kill_rate: 0.0,
        };
        assert!((t.mean_at_unit_time().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_tempered_stable_monte_carlo_cross_check() {
        let mut rng = stream(11, 0, 0);
        let n = 100_000;
        let dt = 0.1;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sample_tempered_stable_increment(0.5, 1.0, 1.0, dt, &mut rng).unwrap();
        }
        let mean_rate = acc / (n as f64 * dt);
        // Var per unit time is -phi''(0) = 1/4, so the mean rate over total
        // time n*dt has sigma = 0.005; 0.02 is a 4-sigma band.
        assert!(
            (mean_rate - 0.5).abs() < 0.02,
            "tempered-stable empirical mean rate {mean_rate}"
        );
    }

    #[test]
    fn mean_rejects_killed() {
        let t = LevyTriplet { kill_rate: 0.5, ..bessel6_xi() };
        assert!(matches!(
            t.mean_at_unit_time(),
            Err(LevyError::KilledProcess(_))
        ));
    }

    #[test]
    fn mgf_brownian_cramer_point() {
        // E exp(-2 xi_1) for xi = 2B + 4t: exp(theta^2 var/2 - theta drift) = 1.
        let m = bessel6_xi().mgf_at(2.0).finite().unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mgf_at_zero_is_one() {
        for t in [
            bessel6_xi(),
            LevyTriplet::pure_drift(-3.0),
            LevyTriplet::with_jumps(0.0, 1.0, 2.0, JumpLaw::Exponential { rate: 3.0 }),
        ] {
            assert_eq!(t.mgf_at(0.0), Mgf::Finite(1.0));
        }
    }

    #[test]
    fn mgf_infinite_beyond_jump_rate() {
        let t = LevyTriplet::with_jumps(0.0, 0.0, 1.0, JumpLaw::Exponential { rate: 1.0 });
        // theta = -2 asks for E exp(2 J) with J ~ Exp(1): divergent.
        assert!(t.mgf_at(-2.0).is_infinite());
        assert!(!t.mgf_at(-0.5).is_infinite());
    }

    #[test]
    fn condition_h_brownian_holds() {
        let c = bessel6_xi().condition_h();
        assert!(c.holds, "{:?}", c.reasons);
        assert_eq!(c.m, Some(4.0));
    }

    #[test]
    fn condition_h_flags_lattice() {
        let t = LevyTriplet::with_jumps(0.0, 0.0, 1.0, JumpLaw::PointMass { value: 1.0 });
        let c = t.condition_h();
        assert!(!c.holds);
        assert!(c.reasons.iter().any(|r| r.contains("lattice")));
    }

    #[test]
    fn condition_h_tempered_stable() {
        let t = LevyTriplet {
            drift: 0.0,
            gaussian_var: 0.0,
            jumps: JumpSpec::TemperedStable { beta: 0.5, theta: 1.0, scale: 1.0 },
            kill_rate: 0.0,
        };
        let c = t.condition_h();
        assert!(c.holds);
        assert!((c.m.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn condition_h_m_matches_mean() {
        for t in [
            bessel6_xi(),
            LevyTriplet::with_jumps(1.0, 2.0, 3.0, JumpLaw::Exponential { rate: 2.0 }),
        ] {
            assert_eq!(t.condition_h().m.unwrap(), t.mean_at_unit_time().unwrap());
        }
    }

    #[test]
    fn negate_mirrors_and_involutes() {
        let t = bessel6_xi();
        let n = t.negate();
        assert_eq!(n.drift, -4.0);
        assert_eq!(n.gaussian_var, 4.0);
        assert_eq!(n.negate(), t);

        let ts = LevyTriplet {
            drift: 1.0,
            gaussian_var: 0.5,
            jumps: JumpSpec::TemperedStable { beta: 0.3, theta: 2.0, scale: 1.5 },
            kill_rate: 0.0,
        };
        assert!(matches!(
            ts.negate().jumps,
            JumpSpec::NegatedTemperedStable { .. }
        ));
        assert_eq!(ts.negate().negate(), ts);
    }

    #[test]
    fn zero_triplet_path_is_flat() {
        let t = LevyTriplet::brownian(0.0, 0.0);
        let mut rng = stream(1, 0, 0);
        let p = simulate_path(&t, 1.0, 0.1, &mut rng).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.terminal_time(), 1.0);
    }

    #[test]
    fn pure_drift_path_is_exact() {
        let t = LevyTriplet::pure_drift(3.0);
        let mut rng = stream(1, 0, 0);
        let p = simulate_path(&t, 2.0, 0.25, &mut rng).unwrap();
        for (s, v) in p.times.iter().zip(p.values.iter()) {
            assert!((v - 3.0 * s).abs() <= 1e-12 * (1.0 + v.abs()), "t={s} v={v}");
        }
    }

    #[test]
    fn paths_are_bit_deterministic() {
        let t = LevyTriplet::with_jumps(1.0, 2.0, 3.0, JumpLaw::TwoSidedExponential {
            rate_up: 1.0,
            rate_down: 2.0,
            p_up: 0.4,
        });
        let a = simulate_path(&t, 5.0, 0.01, &mut stream(7, 3, 1)).unwrap();
        let b = simulate_path(&t, 5.0, 0.01, &mut stream(7, 3, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brownian_terminal_variance_band() {
        let t = LevyTriplet::brownian(0.0, 4.0);
        let terminals: Vec<f64> = crate::rng::parallel_replicates(21, 0, 10_000, |_, rng| {
            simulate_path(&t, 1.0, 0.05, rng).unwrap().terminal_value()
        });
        let var = stats::sample_variance(&terminals);
        assert!((3.8..=4.2).contains(&var), "terminal variance {var}");
    }

    #[test]
    fn negated_mean_shows_in_terminals() {
        let t = LevyTriplet::with_jumps(2.0, 1.0, 1.0, JumpLaw::Exponential { rate: 2.0 });
        let m = t.mean_at_unit_time().unwrap();
        let neg = t.negate();
        let terminals: Vec<f64> = crate::rng::parallel_replicates(22, 0, 4000, |_, rng| {
            simulate_path(&neg, 2.0, 0.02, rng).unwrap().terminal_value()
        });
        let mean = stats::mean(&terminals);
        let se = stats::standard_error(&terminals);
        assert!(
            (mean + m * 2.0).abs() < 4.0 * se + 1e-9,
            "mean {mean} vs {} (se {se})",
            -m * 2.0
        );
    }

    #[test]
    fn jump_epochs_are_grid_points() {
        let t = LevyTriplet::with_jumps(0.0, 0.0, 5.0, JumpLaw::Exponential { rate: 1.0 });
        let p = simulate_path(&t, 3.0, 0.5, &mut stream(3, 0, 0)).unwrap();
        assert!(!p.jump_marks.is_empty());
        for &i in &p.jump_marks {
            // A pure-jump path moves only at jump marks.
            assert_ne!(p.values[i], p.values[i - 1]);
        }
        for i in 1..p.len() {
            if !p.is_jump_index(i) {
                assert_eq!(p.values[i], p.values[i - 1]);
            }
        }
    }

    #[test]
    fn first_passage_pure_drift() {
        let t = LevyTriplet::pure_drift(-1.0);
        let p = simulate_path(&t, 5.0, 0.01, &mut stream(1, 0, 0)).unwrap();
        let fp = p.first_passage_below(-2.0).unwrap().unwrap();
        assert!((fp.time - 2.0).abs() <= 0.01 + 1e-9);
        assert!(fp.overshoot <= 0.0 && fp.overshoot >= -0.011);
    }

    #[test]
    fn first_passage_not_reached() {
        let t = LevyTriplet::pure_drift(1.0);
        let p = simulate_path(&t, 5.0, 0.01, &mut stream(1, 0, 0)).unwrap();
        assert!(p.first_passage_below(-1.0).unwrap().is_none());
    }

    #[test]
    fn first_passage_rejects_nonnegative_level() {
        let t = LevyTriplet::pure_drift(-1.0);
        let p = simulate_path(&t, 1.0, 0.1, &mut stream(1, 0, 0)).unwrap();
        assert!(matches!(
            p.first_passage_below(0.0),
            Err(LevyError::NonNegativeLevel(_))
        ));
    }

    #[test]
    fn passage_refinement_is_order_step_on_pure_drift() {
        let t = LevyTriplet::pure_drift(-1.0);
        for &(step, tol) in &[(0.02, 0.02), (0.01, 0.01), (0.005, 0.005)] {
            let p = simulate_path(&t, 5.0, step, &mut stream(1, 0, 0)).unwrap();
            let fp = p.first_passage_below(-2.0).unwrap().unwrap();
            assert!((fp.time - 2.0).abs() <= tol + 1e-9, "step {step}: {}", fp.time);
        }
    }

    #[test]
    fn overshoot_law_memoryless_jumps() {
        // Downward NegExp(2) jumps: crossing overshoot magnitudes ~ Exp(2).
        let t = LevyTriplet::with_jumps(0.0, 0.0, 1.0, JumpLaw::NegExponential { rate: 2.0 });
        let overshoots: Vec<f64> = crate::rng::parallel_replicates(23, 0, 10_000, |_, rng| {
            let p = simulate_path(&t, 400.0, 1.0, rng).unwrap();
            p.first_passage_below(-3.0)
                .unwrap()
                .map(|fp| -fp.overshoot)
                .unwrap_or(f64::NAN)
        });
        let crossings: Vec<f64> = overshoots.into_iter().filter(|x| x.is_finite()).collect();
        assert!(crossings.len() > 9_500, "only {} crossings", crossings.len());
        let oracle: Vec<f64> = crate::rng::parallel_replicates(23, 1, 10_000, |_, rng| {
            let e: f64 = rand_distr::Exp1.sample(rng);
            e / 2.0
        });
        let ks = stats::ks_two_sample(&crossings, &oracle).unwrap();
        assert!(ks.p_value > 0.001, "KS p = {} (D = {})", ks.p_value, ks.statistic);
    }

    #[test]
    fn kanter_stable_half_matches_inverse_chi_square() {
        // For beta = 1/2 the standard positive stable law is 1/(2 N^2).
        let a: Vec<f64> = crate::rng::parallel_replicates(24, 0, 20_000, |_, rng| {
            sample_positive_stable(0.5, rng)
        });
        let b: Vec<f64> = crate::rng::parallel_replicates(24, 1, 20_000, |_, rng| {
            let z: f64 = StandardNormal.sample(rng);
            1.0 / (2.0 * z * z)
        });
        let ks = stats::ks_two_sample(&a, &b).unwrap();
        assert!(ks.p_value > 0.001, "KS p = {}", ks.p_value);
    }

    #[test]
    fn horizon_shorter_than_step() {
        let t = LevyTriplet::pure_drift(1.0);
        let p = simulate_path(&t, 0.03, 0.1, &mut stream(1, 0, 0)).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.terminal_time() - 0.03).abs() < 1e-15);
    }
}
