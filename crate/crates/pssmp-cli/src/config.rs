//! Line-oriented experiment configuration: `key = value` entries under
//! square-bracket sections, numbers in decimal or scientific notation,
//! strings unquoted, `#` comments allowed. Parsing validates every key
//! and reports offending line numbers; `emit` produces the canonical
//! form, and parse -> emit -> parse is the identity on the parsed value.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use pssmp_core::levy::{JumpLaw, JumpSpec, LevyTriplet};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("line {line}: cannot parse '{value}' as {ty}")]
    BadValue { line: usize, value: String, ty: &'static str },
    #[error("missing mandatory key: seed")]
    MissingSeed,
    #[error("missing experiment kind (config [experiment] kind or CLI subcommand)")]
    MissingKind,
    #[error("config kind '{config}' conflicts with requested '{requested}'")]
    KindMismatch { config: String, requested: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// The experiment dispatched by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Simulate,
    Tail,
    EntranceCheck,
    ReversalCheck,
    Decomposition,
    IntegralTest,
    Lil,
    Report,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Tail => "tail",
            ExperimentKind::EntranceCheck => "entrance-check",
            ExperimentKind::ReversalCheck => "reversal-check",
            ExperimentKind::Decomposition => "decomposition",
            ExperimentKind::IntegralTest => "integral-test",
            ExperimentKind::Lil => "lil",
            ExperimentKind::Report => "report",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => ExperimentKind::Simulate,
            "tail" => ExperimentKind::Tail,
            "entrance-check" => ExperimentKind::EntranceCheck,
            "reversal-check" => ExperimentKind::ReversalCheck,
            "decomposition" => ExperimentKind::Decomposition,
            "integral-test" => ExperimentKind::IntegralTest,
            "lil" => ExperimentKind::Lil,
            "report" => ExperimentKind::Report,
            _ => return None,
        })
    }

    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Simulate,
        ExperimentKind::Tail,
        ExperimentKind::EntranceCheck,
        ExperimentKind::ReversalCheck,
        ExperimentKind::Decomposition,
        ExperimentKind::IntegralTest,
        ExperimentKind::Lil,
        ExperimentKind::Report,
    ];
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simulation grid parameters shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimParams {
    pub alpha: f64,
    pub step: f64,
    pub horizon: f64,
    pub n_paths: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { alpha: 1.0, step: 0.01, horizon: 1.0, n_paths: 1 }
    }
}

/// Experiment-specific knobs; unset values fall back to documented
/// defaults at the point of use.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExperimentParams {
    pub thresholds: Option<Vec<f64>>,
    pub levels: Option<Vec<f64>>,
    pub q_list: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub x: Option<f64>,
    pub x1: Option<f64>,
    pub x_small: Option<f64>,
    pub t_probe: Option<f64>,
    pub scale_k: Option<f64>,
    pub depth: Option<f64>,
    pub grid_ratio: Option<f64>,
    pub window_lo: Option<f64>,
    pub window_hi: Option<f64>,
    pub func_c: Option<f64>,
    pub func_a: Option<f64>,
    pub func_b: Option<f64>,
    pub func_d: Option<f64>,
    pub func_side: Option<String>,
    pub tail_kind: Option<String>,
    pub tail_gamma: Option<f64>,
    pub tail_lambda: Option<f64>,
    pub tail_beta: Option<f64>,
    pub tail_log_power: Option<f64>,
    pub expect: Option<String>,
}

/// A fully parsed experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub triplet: LevyTriplet,
    pub sim: SimParams,
    pub params: ExperimentParams,
}

/// Raw key-value store used during parsing of the triplet section.
#[derive(Default)]
struct TripletDraft {
    drift: Option<f64>,
    gaussian_var: Option<f64>,
    kill_rate: Option<f64>,
    jumps: Option<String>,
    rate: Option<f64>,
    law: Option<String>,
    mu: Option<f64>,
    value: Option<f64>,
    mu_up: Option<f64>,
    mu_down: Option<f64>,
    p_up: Option<f64>,
    beta: Option<f64>,
    theta: Option<f64>,
    scale: Option<f64>,
}

impl TripletDraft {
    fn build(self) -> Result<LevyTriplet, ConfigError> {
        let jumps = match self.jumps.as_deref().unwrap_or("none") {
            "none" => JumpSpec::None,
            "compound_poisson" => {
                let rate = self
                    .rate
                    .ok_or_else(|| ConfigError::Invalid("compound_poisson needs rate".into()))?;
                let law = match self.law.as_deref().unwrap_or("exponential") {
                    "exponential" => JumpLaw::Exponential {
                        rate: self.mu.ok_or_else(|| {
                            ConfigError::Invalid("exponential law needs mu".into())
                        })?,
                    },
                    "neg_exponential" => JumpLaw::NegExponential {
                        rate: self.mu.ok_or_else(|| {
                            ConfigError::Invalid("neg_exponential law needs mu".into())
                        })?,
                    },
                    "point_mass" => JumpLaw::PointMass {
                        value: self.value.ok_or_else(|| {
                            ConfigError::Invalid("point_mass law needs value".into())
                        })?,
                    },
                    "two_sided_exponential" => JumpLaw::TwoSidedExponential {
                        rate_up: self.mu_up.ok_or_else(|| {
                            ConfigError::Invalid("two_sided_exponential needs mu_up".into())
                        })?,
                        rate_down: self.mu_down.ok_or_else(|| {
                            ConfigError::Invalid("two_sided_exponential needs mu_down".into())
                        })?,
                        p_up: self.p_up.ok_or_else(|| {
                            ConfigError::Invalid("two_sided_exponential needs p_up".into())
                        })?,
                    },
                    other => {
                        return Err(ConfigError::Invalid(format!("unknown jump law '{other}'")))
                    }
                };
                JumpSpec::CompoundPoisson { rate, law }
            }
            kind @ ("tempered_stable" | "negated_tempered_stable") => {
                let beta = self
                    .beta
                    .ok_or_else(|| ConfigError::Invalid(format!("{kind} needs beta")))?;
                let theta = self
                    .theta
                    .ok_or_else(|| ConfigError::Invalid(format!("{kind} needs theta")))?;
                let scale = self
                    .scale
                    .ok_or_else(|| ConfigError::Invalid(format!("{kind} needs scale")))?;
                if kind == "tempered_stable" {
                    JumpSpec::TemperedStable { beta, theta, scale }
                } else {
                    JumpSpec::NegatedTemperedStable { beta, theta, scale }
                }
            }
            other => return Err(ConfigError::Invalid(format!("unknown jumps kind '{other}'"))),
        };
        LevyTriplet::new(
            self.drift.unwrap_or(0.0),
            self.gaussian_var.unwrap_or(0.0),
            jumps,
            self.kill_rate.unwrap_or(0.0),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn parse_f64(line: usize, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().map_err(|_| ConfigError::BadValue {
        line,
        value: v.to_string(),
        ty: "number",
    })
}

fn parse_u64(line: usize, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>().map_err(|_| ConfigError::BadValue {
        line,
        value: v.to_string(),
        ty: "integer",
    })
}

fn parse_list(line: usize, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|part| parse_f64(line, part.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Parse a config, taking the experiment kind from the text or from
    /// the fallback (the CLI subcommand); both present must agree.
    pub fn parse(text: &str, fallback_kind: Option<ExperimentKind>) -> Result<Self, ConfigError> {
        let mut section = String::from("experiment");
        let mut seen: Vec<(String, String)> = Vec::new();
        let mut kind: Option<ExperimentKind> = None;
        let mut seed: Option<u64> = None;
        let mut triplet = TripletDraft::default();
        let mut sim = SimParams::default();
        let mut params = ExperimentParams::default();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                match name {
                    "experiment" | "triplet" | "sim" | "params" => section = name.to_string(),
                    _ => {
                        return Err(ConfigError::UnknownSection {
                            line,
                            name: name.to_string(),
                        })
                    }
                }
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Malformed { line, text: trimmed.to_string() });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let scoped = format!("{section}.{key}");
            if seen.iter().any(|(s, _)| *s == scoped) {
                return Err(ConfigError::DuplicateKey { line, key: scoped });
            }
            seen.push((scoped.clone(), value.clone()));

            match (section.as_str(), key.as_str()) {
                ("experiment", "kind") => {
                    kind = Some(ExperimentKind::from_name(&value).ok_or(
                        ConfigError::BadValue { line, value: value.clone(), ty: "experiment kind" },
                    )?);
                }
                ("experiment", "seed") => seed = Some(parse_u64(line, &value)?),
                ("triplet", "drift") => triplet.drift = Some(parse_f64(line, &value)?),
                ("triplet", "gaussian_var") => {
                    triplet.gaussian_var = Some(parse_f64(line, &value)?)
                }
                ("triplet", "kill_rate") => triplet.kill_rate = Some(parse_f64(line, &value)?),
                ("triplet", "jumps") => triplet.jumps = Some(value),
                ("triplet", "rate") => triplet.rate = Some(parse_f64(line, &value)?),
                ("triplet", "law") => triplet.law = Some(value),
                ("triplet", "mu") => triplet.mu = Some(parse_f64(line, &value)?),
                ("triplet", "value") => triplet.value = Some(parse_f64(line, &value)?),
                ("triplet", "mu_up") => triplet.mu_up = Some(parse_f64(line, &value)?),
                ("triplet", "mu_down") => triplet.mu_down = Some(parse_f64(line, &value)?),
                ("triplet", "p_up") => triplet.p_up = Some(parse_f64(line, &value)?),
                ("triplet", "beta") => triplet.beta = Some(parse_f64(line, &value)?),
                ("triplet", "theta") => triplet.theta = Some(parse_f64(line, &value)?),
                ("triplet", "scale") => triplet.scale = Some(parse_f64(line, &value)?),
                ("sim", "alpha") => sim.alpha = parse_f64(line, &value)?,
                ("sim", "step") => sim.step = parse_f64(line, &value)?,
                ("sim", "horizon") => sim.horizon = parse_f64(line, &value)?,
                ("sim", "n_paths") => sim.n_paths = parse_u64(line, &value)? as usize,
                ("params", "thresholds") => params.thresholds = Some(parse_list(line, &value)?),
                ("params", "levels") => params.levels = Some(parse_list(line, &value)?),
                ("params", "q_list") => params.q_list = Some(parse_list(line, &value)?),
                ("params", "tol") => params.tol = Some(parse_f64(line, &value)?),
                ("params", "x") => params.x = Some(parse_f64(line, &value)?),
                ("params", "x1") => params.x1 = Some(parse_f64(line, &value)?),
                ("params", "x_small") => params.x_small = Some(parse_f64(line, &value)?),
                ("params", "t_probe") => params.t_probe = Some(parse_f64(line, &value)?),
                ("params", "scale_k") => params.scale_k = Some(parse_f64(line, &value)?),
                ("params", "depth") => params.depth = Some(parse_f64(line, &value)?),
                ("params", "grid_ratio") => params.grid_ratio = Some(parse_f64(line, &value)?),
                ("params", "window_lo") => params.window_lo = Some(parse_f64(line, &value)?),
                ("params", "window_hi") => params.window_hi = Some(parse_f64(line, &value)?),
                ("params", "func_c") => params.func_c = Some(parse_f64(line, &value)?),
                ("params", "func_a") => params.func_a = Some(parse_f64(line, &value)?),
                ("params", "func_b") => params.func_b = Some(parse_f64(line, &value)?),
                ("params", "func_d") => params.func_d = Some(parse_f64(line, &value)?),
                ("params", "func_side") => params.func_side = Some(value),
                ("params", "tail_kind") => params.tail_kind = Some(value),
                ("params", "tail_gamma") => params.tail_gamma = Some(parse_f64(line, &value)?),
                ("params", "tail_lambda") => params.tail_lambda = Some(parse_f64(line, &value)?),
                ("params", "tail_beta") => params.tail_beta = Some(parse_f64(line, &value)?),
                ("params", "tail_log_power") => {
                    params.tail_log_power = Some(parse_f64(line, &value)?)
                }
                ("params", "expect") => params.expect = Some(value),
                (_, _) => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        section: section.clone(),
                        key,
                    })
                }
            }
        }

        let kind = match (kind, fallback_kind) {
            (Some(k), Some(f)) if k != f => {
                return Err(ConfigError::KindMismatch {
                    config: k.to_string(),
                    requested: f.to_string(),
                })
            }
            (Some(k), _) => k,
            (None, Some(f)) => f,
            (None, None) => return Err(ConfigError::MissingKind),
        };
        let seed = seed.ok_or(ConfigError::MissingSeed)?;
        Ok(ExperimentConfig { kind, seed, triplet: triplet.build()?, sim, params })
    }

    /// Canonical text form; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        out.push_str("[experiment]\n");
        push(&mut out, "kind", self.kind.to_string());
        push(&mut out, "seed", self.seed.to_string());
        out.push_str("\n[triplet]\n");
        push(&mut out, "drift", self.triplet.drift.to_string());
        push(&mut out, "gaussian_var", self.triplet.gaussian_var.to_string());
        push(&mut out, "kill_rate", self.triplet.kill_rate.to_string());
        match self.triplet.jumps {
            JumpSpec::None => push(&mut out, "jumps", "none".into()),
            JumpSpec::CompoundPoisson { rate, law } => {
                push(&mut out, "jumps", "compound_poisson".into());
                push(&mut out, "rate", rate.to_string());
                match law {
                    JumpLaw::Exponential { rate } => {
                        push(&mut out, "law", "exponential".into());
                        push(&mut out, "mu", rate.to_string());
                    }
                    JumpLaw::NegExponential { rate } => {
                        push(&mut out, "law", "neg_exponential".into());
                        push(&mut out, "mu", rate.to_string());
                    }
                    JumpLaw::PointMass { value } => {
                        push(&mut out, "law", "point_mass".into());
                        push(&mut out, "value", value.to_string());
                    }
                    JumpLaw::TwoSidedExponential { rate_up, rate_down, p_up } => {
                        push(&mut out, "law", "two_sided_exponential".into());
                        push(&mut out, "mu_up", rate_up.to_string());
                        push(&mut out, "mu_down", rate_down.to_string());
                        push(&mut out, "p_up", p_up.to_string());
                    }
                }
            }
            JumpSpec::TemperedStable { beta, theta, scale } => {
                push(&mut out, "jumps", "tempered_stable".into());
                push(&mut out, "beta", beta.to_string());
                push(&mut out, "theta", theta.to_string());
                push(&mut out, "scale", scale.to_string());
            }
            JumpSpec::NegatedTemperedStable { beta, theta, scale } => {
                push(&mut out, "jumps", "negated_tempered_stable".into());
                push(&mut out, "beta", beta.to_string());
                push(&mut out, "theta", theta.to_string());
                push(&mut out, "scale", scale.to_string());
            }
        }
        out.push_str("\n[sim]\n");
        push(&mut out, "alpha", self.sim.alpha.to_string());
        push(&mut out, "step", self.sim.step.to_string());
        push(&mut out, "horizon", self.sim.horizon.to_string());
        push(&mut out, "n_paths", self.sim.n_paths.to_string());
        out.push_str("\n[params]\n");
        let list = |v: &[f64]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        };
        let p = &self.params;
        if let Some(v) = &p.thresholds {
            push(&mut out, "thresholds", list(v));
        }
        if let Some(v) = &p.levels {
            push(&mut out, "levels", list(v));
        }
        if let Some(v) = &p.q_list {
            push(&mut out, "q_list", list(v));
        }
        let scalars: [(&str, &Option<f64>); 16] = [
            ("tol", &p.tol),
            ("x", &p.x),
            ("x1", &p.x1),
            ("x_small", &p.x_small),
            ("t_probe", &p.t_probe),
            ("scale_k", &p.scale_k),
            ("depth", &p.depth),
            ("grid_ratio", &p.grid_ratio),
            ("window_lo", &p.window_lo),
            ("window_hi", &p.window_hi),
            ("func_c", &p.func_c),
            ("func_a", &p.func_a),
            ("func_b", &p.func_b),
            ("func_d", &p.func_d),
            ("tail_gamma", &p.tail_gamma),
            ("tail_lambda", &p.tail_lambda),
        ];
        for (k, v) in scalars {
            if let Some(v) = v {
                push(&mut out, k, v.to_string());
            }
        }
        if let Some(v) = &p.tail_beta {
            push(&mut out, "tail_beta", v.to_string());
        }
        if let Some(v) = &p.tail_log_power {
            push(&mut out, "tail_log_power", v.to_string());
        }
        for (k, v) in [
            ("func_side", &p.func_side),
            ("tail_kind", &p.tail_kind),
            ("expect", &p.expect),
        ] {
            if let Some(v) = v {
                push(&mut out, k, v.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config_applies_defaults() {
        let cfg =
            ExperimentConfig::parse("[experiment]\nseed = 7\n", Some(ExperimentKind::Simulate))
                .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Simulate);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.triplet, LevyTriplet::brownian(0.0, 0.0));
        assert_eq!(cfg.sim, SimParams::default());
    }

    #[test]
    fn missing_seed_is_an_error() {
        let err = ExperimentConfig::parse("[experiment]\nkind = simulate\n", None).unwrap_err();
        assert!(matches!(err, ConfigError::MissingSeed));
    }

    #[test]
    fn duplicate_key_names_the_line() {
        let text = "[experiment]\nseed = 1\nseed = 2\n";
        match ExperimentConfig::parse(text, Some(ExperimentKind::Tail)) {
            Err(ConfigError::DuplicateKey { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_names_line_and_section() {
        let text = "[experiment]\nseed = 1\n[sim]\nstep = 0.1\nbogus = 3\n";
        match ExperimentConfig::parse(text, Some(ExperimentKind::Tail)) {
            Err(ConfigError::UnknownKey { line, section, key }) => {
                assert_eq!(line, 5);
                assert_eq!(section, "sim");
                assert_eq!(key, "bogus");
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn kind_mismatch_rejected() {
        let text = "[experiment]\nkind = tail\nseed = 1\n";
        assert!(matches!(
            ExperimentConfig::parse(text, Some(ExperimentKind::Lil)),
            Err(ConfigError::KindMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_fixture() {
        let text = "\
[experiment]
kind = tail
seed = 42

[triplet]
drift = -4
gaussian_var = 4
jumps = none

[sim]
alpha = 1
step = 2e-3
horizon = 10
n_paths = 500

[params]
tol = 1e-4
thresholds = 0.5, 1, 2.5
";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        let emitted = cfg.emit();
        let again = ExperimentConfig::parse(&emitted, None).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(emitted, again.emit());
    }

    #[test]
    fn round_trip_compound_poisson() {
        let text = "\
[experiment]
kind = decomposition
seed = 9
[triplet]
jumps = compound_poisson
rate = 1.5
law = two_sided_exponential
mu_up = 1
mu_down = 2
p_up = 0.25
[params]
levels = 0.5, 0.25
";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        let again = ExperimentConfig::parse(&cfg.emit(), None).unwrap();
        assert_eq!(cfg, again);
    }
}
