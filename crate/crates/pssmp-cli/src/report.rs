//! Run reports: per-check outcomes with their statistics and seed
//! lineage, plus a config fingerprint so artifacts trace back to exact
//! inputs.

use serde::Serialize;

use crate::config::ExperimentConfig;

/// One check inside a run: its statistic, where its randomness came from
/// (master seed and lane), and whether it passed.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    pub n: usize,
    pub seed: u64,
    pub lane: u64,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, n: usize, seed: u64, lane: u64) -> Self {
        CheckOutcome {
            name: name.into(),
            passed,
            statistic: None,
            p_value: None,
            ci: None,
            n,
            seed,
            lane,
            detail: String::new(),
        }
    }

    pub fn with_p(mut self, statistic: f64, p_value: f64) -> Self {
        self.statistic = Some(statistic);
        self.p_value = Some(p_value);
        self
    }

    pub fn with_ci(mut self, ci: (f64, f64)) -> Self {
        self.ci = Some(ci);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Full report of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub kind: String,
    pub seed: u64,
    pub outcomes: Vec<CheckOutcome>,
    pub artifacts: Vec<String>,
    pub wall_seconds: f64,
    pub passed: bool,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunReport {
            fingerprint: fingerprint(config),
            kind: config.kind.to_string(),
            seed: config.seed,
            outcomes: Vec::new(),
            artifacts: Vec::new(),
            wall_seconds: 0.0,
            passed: true,
        }
    }

    pub fn push(&mut self, outcome: CheckOutcome) {
        self.passed &= outcome.passed;
        self.outcomes.push(outcome);
    }
}

/// FNV-1a hash of the canonical config text.
pub fn fingerprint(config: &ExperimentConfig) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in config.emit().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, ExperimentKind};

    #[test]
    fn fingerprint_tracks_config_content() {
        let a = ExperimentConfig::parse("[experiment]\nseed = 1\n", Some(ExperimentKind::Tail))
            .unwrap();
        let b = ExperimentConfig::parse("[experiment]\nseed = 2\n", Some(ExperimentKind::Tail))
            .unwrap();
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a), fingerprint(&a));
    }

    #[test]
    fn report_passed_tracks_outcomes() {
        let cfg = ExperimentConfig::parse("[experiment]\nseed = 1\n", Some(ExperimentKind::Tail))
            .unwrap();
        let mut r = RunReport::new(&cfg);
        r.push(CheckOutcome::new("a", true, 10, 1, 0));
        assert!(r.passed);
        r.push(CheckOutcome::new("b", false, 10, 1, 1));
        assert!(!r.passed);
    }
}
