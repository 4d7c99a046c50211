//! Experiment dispatch: each experiment runs a reproducible batch of
//! simulations, writes its CSV/JSON artifacts into the output directory
//! and returns a [`RunReport`]. Identical `(config, seed)` produce
//! byte-identical artifacts.
//!
//! Lane convention: library samplers that take a master seed use lanes
//! 0 and 1 internally, so experiment-level channels here start at lane 7.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use pssmp_core::envelope::{
    self, classify_at_infinity, classify_at_zero, Outcome, Side, TailModel, TestFunction,
};
use pssmp_core::expfun::{self, sample_exp_integral, ExpFunError};
use pssmp_core::lamperti::{self, entrance_sampler, marginal_at, simulate_from_zero, to_pssmp};
use pssmp_core::levy::{simulate_path, JumpLaw, JumpSpec};
use pssmp_core::reversal::{
    build_decomposition, check_bounds, gamma_oracle_exponential, last_passage_identity_check,
    sample_gamma, IdentityCheckParams, ReversalError,
};
use pssmp_core::rng::{parallel_replicates, stream};
use pssmp_core::stats;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{CheckOutcome, RunReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("experiment '{kind}' needs parameter '{key}'")]
    MissingParam { kind: &'static str, key: &'static str },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Levy(#[from] pssmp_core::levy::LevyError),
    #[error(transparent)]
    ExpFun(#[from] ExpFunError),
    #[error(transparent)]
    Lamperti(#[from] lamperti::LampertiError),
    #[error(transparent)]
    Reversal(#[from] ReversalError),
    #[error(transparent)]
    Envelope(#[from] envelope::EnvelopeError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_artifact(
    out_dir: &Path,
    report: &mut RunReport,
    name: &str,
    content: &str,
) -> Result<(), CliError> {
    let path = out_dir.join(name);
    fs::write(&path, content).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    report.artifacts.push(name.to_string());
    Ok(())
}

/// Run one experiment and write its artifacts under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let started = Instant::now();
    let mut report = RunReport::new(config);
    match config.kind {
        ExperimentKind::Simulate => run_simulate(config, out_dir, &mut report)?,
        ExperimentKind::Tail => run_tail(config, out_dir, &mut report)?,
        ExperimentKind::EntranceCheck => run_entrance_check(config, out_dir, &mut report)?,
        ExperimentKind::ReversalCheck => run_reversal_check(config, &mut report)?,
        ExperimentKind::Decomposition => run_decomposition(config, out_dir, &mut report)?,
        ExperimentKind::IntegralTest => run_integral_test(config, out_dir, &mut report)?,
        ExperimentKind::Lil => run_lil(config, out_dir, &mut report)?,
        ExperimentKind::Report => run_battery(config, &mut report)?,
    }
    report.wall_seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report)?;
    write_artifact(out_dir, &mut report, "report.json", &json)?;
    // The artifact list inside report.json does not include report.json
    // itself; rewrite with the final list for fidelity.
    let json = serde_json::to_string_pretty(&report)?;
    let path = out_dir.join("report.json");
    fs::write(&path, json).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(report)
}

fn run_simulate(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let n = config.sim.n_paths.max(1);
    for i in 0..n {
        let mut rng = stream(config.seed, 7, i as u64);
        let path = simulate_path(&config.triplet, config.sim.horizon, config.sim.step, &mut rng)?;
        let mut csv = String::from("t,value,is_jump\n");
        for j in 0..path.len() {
            let jump = if path.is_jump_index(j) { 1 } else { 0 };
            writeln!(csv, "{},{},{}", path.times[j], path.values[j], jump).unwrap();
        }
        write_artifact(out_dir, report, &format!("path_{i:03}.csv"), &csv)?;
        if let Some(x) = config.params.x {
            let pssmp = to_pssmp(&path, x, config.sim.alpha)?;
            let mut csv = String::from("t,value\n");
            for j in 0..pssmp.len() {
                writeln!(csv, "{},{}", pssmp.times[j], pssmp.values[j]).unwrap();
            }
            write_artifact(out_dir, report, &format!("pssmp_{i:03}.csv"), &csv)?;
        }
    }
    report.push(
        CheckOutcome::new("simulate", true, n, config.seed, 7)
            .with_detail(format!("{n} path(s) written")),
    );
    Ok(())
}

fn run_tail(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let thresholds = config
        .params
        .thresholds
        .as_ref()
        .ok_or(CliError::MissingParam { kind: "tail", key: "thresholds" })?;
    let n = config.sim.n_paths;
    let tol = config.params.tol.unwrap_or(1e-4);
    let hat = config.triplet.negate();
    let samples: Result<Vec<f64>, ExpFunError> =
        parallel_replicates(config.seed, 7, n, |_, rng| {
            Ok(sample_exp_integral(&hat, tol, config.sim.step, rng)?.value)
        })
        .into_iter()
        .collect();
    let samples = samples?;
    let mut csv = format!(
        "# triplet = {}\n# seed = {}\nvalue\n",
        config.triplet.fingerprint(),
        config.seed
    );
    for v in &samples {
        writeln!(csv, "{v}").unwrap();
    }
    write_artifact(out_dir, report, "samples.csv", &csv)?;
    let tail = expfun::estimate_tail(&samples, thresholds)?;
    let mut csv = String::from("threshold,survival,ci_low,ci_high\n");
    for i in 0..tail.thresholds.len() {
        writeln!(
            csv,
            "{},{},{},{}",
            tail.thresholds[i], tail.survival[i], tail.ci_low[i], tail.ci_high[i]
        )
        .unwrap();
    }
    write_artifact(out_dir, report, "tail.csv", &csv)?;
    let mean = stats::mean(&samples);
    let se = stats::standard_error(&samples);
    report.push(
        CheckOutcome::new("tail-estimate", true, n, config.seed, 7)
            .with_ci((mean - 2.0 * se, mean + 2.0 * se))
            .with_detail(format!("mean {mean:.6} +- {se:.6}")),
    );
    if let Some(exact) = expfun::analytic_mean_exp_integral(&hat) {
        // Heavy tails can make this band wide but it still catches gross
        // simulation errors.
        let ok = (mean - exact).abs() <= 5.0 * se + 0.01 * exact;
        report.push(
            CheckOutcome::new("mean-vs-analytic", ok, n, config.seed, 7)
                .with_detail(format!("sample {mean:.5} vs exact {exact:.5}")),
        );
    }
    Ok(())
}

fn run_entrance_check(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let n = config.sim.n_paths;
    let t = config.params.t_probe.unwrap_or(1.0);
    let tol = config.params.tol.unwrap_or(1e-4);
    let x_small = config.params.x_small.unwrap_or(1e-3);
    let ent = entrance_sampler(&config.triplet, t, n, tol, config.sim.step, config.seed)?;
    let mut csv = String::from("value,weight\n");
    for (v, w) in ent.values.iter().zip(ent.weights.iter()) {
        writeln!(csv, "{v},{w}").unwrap();
    }
    write_artifact(out_dir, report, "entrance.csv", &csv)?;
    let proxy: Result<Vec<f64>, lamperti::LampertiError> =
        parallel_replicates(config.seed, 7, n, |_, rng| {
            marginal_at(&config.triplet, x_small, config.sim.alpha, t, config.sim.step, rng)
        })
        .into_iter()
        .collect();
    let proxy = proxy?;
    let ks = stats::ks_two_sample_weighted(&ent.values, &ent.weights, &proxy)?;
    report.push(
        CheckOutcome::new("entrance-vs-proxy-ks", ks.p_value > 0.01, n, config.seed, 7)
            .with_p(ks.statistic, ks.p_value),
    );
    let mean_w = stats::mean(&ent.raw_weights);
    let se_w = stats::standard_error(&ent.raw_weights);
    report.push(
        CheckOutcome::new(
            "weight-normalization",
            (mean_w - 1.0).abs() <= 3.0 * se_w,
            n,
            config.seed,
            0,
        )
        .with_ci((mean_w - 3.0 * se_w, mean_w + 3.0 * se_w))
        .with_detail(format!("E(1/(mI)) = {mean_w:.5}")),
    );
    Ok(())
}

fn run_reversal_check(config: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let params = IdentityCheckParams {
        x: config.params.x.unwrap_or(1.0),
        x1: config.params.x1.unwrap_or(1.0),
        n: config.sim.n_paths,
        x_small: config.params.x_small.unwrap_or(1e-3),
        horizon: config.sim.horizon,
        tol: config.params.tol.unwrap_or(1e-4),
        depth_z: config.params.depth.unwrap_or(20.0),
        step: config.sim.step,
    };
    match last_passage_identity_check(&config.triplet, params, config.seed) {
        Ok(r) => {
            report.push(
                CheckOutcome::new(
                    "last-passage-identity-ks",
                    r.ks.p_value > 0.01,
                    r.n_resolved,
                    config.seed,
                    0,
                )
                .with_p(r.ks.statistic, r.ks.p_value)
                .with_detail(format!(
                    "unresolved {}/{}",
                    r.unresolved,
                    r.unresolved + r.n_resolved
                )),
            );
            report.push(CheckOutcome::new(
                "unresolved-fraction",
                r.unresolved_fraction <= 0.01,
                r.unresolved + r.n_resolved,
                config.seed,
                0,
            ));
        }
        Err(ReversalError::TooManyUnresolved { unresolved, n }) => {
            report.push(
                CheckOutcome::new("unresolved-fraction", false, n, config.seed, 0)
                    .with_detail(format!("{unresolved}/{n} unresolved; extend the horizon")),
            );
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn run_decomposition(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let levels = config
        .params
        .levels
        .as_ref()
        .ok_or(CliError::MissingParam { kind: "decomposition", key: "levels" })?
        .clone();
    let n = config.sim.n_paths;
    let depth = config.params.depth.unwrap_or(20.0);
    let step = config.sim.step;
    let triplet = config.triplet;
    let decomps: Result<Vec<_>, ReversalError> =
        parallel_replicates(config.seed, 7, n, |_, rng| {
            let gamma0 = sample_gamma(&triplet, depth, step, rng)?;
            build_decomposition(&triplet, &levels, gamma0, step, rng)
        })
        .into_iter()
        .collect();
    let decomps = decomps?;
    let mut csv = String::from("replicate,n,x_n,gamma_n,h_n,u_n\n");
    for (r, d) in decomps.iter().enumerate() {
        for k in 0..d.levels.len() {
            let h = d.durations.get(k).copied().unwrap_or(0.0);
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                r,
                k + 1,
                d.levels[k],
                d.gamma_seq[k],
                h,
                d.u_values[k]
            )
            .unwrap();
        }
    }
    write_artifact(out_dir, report, "decomposition.csv", &csv)?;

    let mut bookkeeping = true;
    for d in &decomps {
        for k in 0..d.levels.len() {
            let direct: f64 = d.durations[k..].iter().sum();
            bookkeeping &= d.u_values[k] == direct && d.gamma_seq[k] <= d.levels[k];
        }
    }
    report.push(CheckOutcome::new("bookkeeping-exact", bookkeeping, n, config.seed, 7));

    let mut min_p = 1.0f64;
    if n >= 30 {
        for k in 1..levels.len() {
            let a: Vec<f64> = decomps.iter().map(|d| d.gamma_seq[0] / levels[0]).collect();
            let b: Vec<f64> = decomps.iter().map(|d| d.gamma_seq[k] / levels[k]).collect();
            min_p = min_p.min(stats::ks_two_sample(&a, &b)?.p_value);
        }
        report.push(
            CheckOutcome::new("cross-level-position-ks", min_p > 0.01, n, config.seed, 7)
                .with_p(f64::NAN, min_p)
                .with_detail("minimum p over level pairs".to_string()),
        );
    }

    let i_samples: Result<Vec<f64>, ExpFunError> =
        parallel_replicates(config.seed, 8, n.min(1000), |_, rng| {
            Ok(sample_exp_integral(
                &triplet.negate(),
                config.params.tol.unwrap_or(1e-4),
                step,
                rng,
            )?
            .value)
        })
        .into_iter()
        .collect();
    let z: Vec<f64> = levels.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let bounds = check_bounds(&decomps, &z, &i_samples?)?;
    report.push(
        CheckOutcome::new(
            "sandwich-bounds",
            bounds.lower_violations == 0,
            bounds.lower_checked,
            config.seed,
            8,
        )
        .with_detail(format!(
            "lower violations {}, vacuous {}",
            bounds.lower_violations, bounds.vacuous
        )),
    );
    Ok(())
}

fn tail_model_from(config: &ExperimentConfig) -> Result<TailModel, CliError> {
    let p = &config.params;
    match p.tail_kind.as_deref().unwrap_or("regular_variation") {
        "regular_variation" => Ok(TailModel::RegularVariation {
            gamma: p.tail_gamma.unwrap_or(2.0),
            lambda: p.tail_lambda.unwrap_or(1.0),
            log_power: p.tail_log_power.unwrap_or(0.0),
        }),
        "log_regular" => Ok(TailModel::LogRegular {
            lambda: p.tail_lambda.unwrap_or(1.0),
            beta: p.tail_beta.unwrap_or(0.5),
            log_power: p.tail_log_power.unwrap_or(0.0),
        }),
        other => Err(CliError::Invalid(format!("unknown tail_kind '{other}'"))),
    }
}

fn side_from(config: &ExperimentConfig) -> Result<Side, CliError> {
    match config.params.func_side.as_deref().unwrap_or("zero") {
        "zero" => Ok(Side::Zero),
        "infinity" => Ok(Side::Infinity),
        other => Err(CliError::Invalid(format!("unknown func_side '{other}'"))),
    }
}

fn run_integral_test(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let tail = tail_model_from(config)?;
    let side = side_from(config)?;
    let p = &config.params;
    let f = TestFunction::new(
        p.func_c.unwrap_or(1.0),
        p.func_a.unwrap_or(1.0),
        p.func_b.unwrap_or(0.0),
        p.func_d.unwrap_or(0.0),
        side,
    )?;
    let verdict = match side {
        Side::Zero => classify_at_zero(&tail, &f)?,
        Side::Infinity => classify_at_infinity(&tail, &f)?,
    };
    write_artifact(out_dir, report, "verdict.json", &serde_json::to_string_pretty(&verdict)?)?;
    let mut csv = String::from("window,growth_exponent\n");
    for (k, s) in &verdict.slope_diagnostics {
        writeln!(csv, "{k},{s}").unwrap();
    }
    write_artifact(out_dir, report, "slope_diagnostics.csv", &csv)?;
    // Plot-ready integrand table over the probed window range.
    let mut csv = String::from("t,integrand\n");
    for i in 0..=200 {
        let t = match side {
            Side::Zero => 0.25 * 2.0f64.powf(-58.0 * i as f64 / 200.0),
            Side::Infinity => 256.0 * 2.0f64.powf(52.0 * i as f64 / 200.0),
        };
        if let Ok(v) = envelope::integrand_at(&tail, &f, t) {
            writeln!(csv, "{t},{v}").unwrap();
        }
    }
    write_artifact(out_dir, report, "integrand.csv", &csv)?;
    let passed = match p.expect.as_deref() {
        Some("converges") => verdict.outcome == Outcome::Converges,
        Some("diverges") => verdict.outcome == Outcome::Diverges,
        Some(other) => {
            return Err(CliError::Invalid(format!("unknown expect '{other}'")));
        }
        None => true,
    };
    report.push(
        CheckOutcome::new("integral-test", passed, 0, config.seed, 0)
            .with_detail(format!("{:?}", verdict.outcome)),
    );
    Ok(())
}

fn run_lil(
    config: &ExperimentConfig,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let tail = tail_model_from(config)?;
    let n = config.sim.n_paths;
    let x_small = config.params.x_small.unwrap_or(1e-3);
    let window_hi = config.params.window_hi.unwrap_or(config.sim.horizon);
    let window_lo = config.params.window_lo.unwrap_or(window_hi * 1e-4);
    let ratio = config.params.grid_ratio.unwrap_or(2.0);
    let triplet = config.triplet;
    let paths: Result<Vec<_>, lamperti::LampertiError> =
        parallel_replicates(config.seed, 7, n, |_, rng| {
            simulate_from_zero(
                &triplet,
                x_small,
                config.sim.alpha,
                config.sim.horizon,
                config.sim.step,
                rng,
            )
        })
        .into_iter()
        .collect();
    let paths = paths?;
    let scale = |t: f64| envelope::psi(&tail, t).unwrap_or(f64::NAN);
    let stats_w =
        envelope::empirical_liminf(&paths, scale, Side::Zero, ratio, (window_lo, window_hi))?;
    let mut csv = String::from("minimum\n");
    for m in &stats_w.minima {
        writeln!(csv, "{m}").unwrap();
    }
    write_artifact(out_dir, report, "minima.csv", &csv)?;
    report.push(
        CheckOutcome::new("lil-minima", stats_w.median.is_finite(), n, config.seed, 7)
            .with_ci((stats_w.q25, stats_w.q75))
            .with_detail(format!(
                "median {:.4}, skipped {} path(s)",
                stats_w.median, stats_w.skipped
            )),
    );
    Ok(())
}

/// Compact verification battery on the configured driver.
fn run_battery(config: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let triplet = config.triplet;
    let cond = triplet.condition_h();
    report.push(
        CheckOutcome::new("condition-h", cond.holds, 0, config.seed, 0).with_detail(format!(
            "m = {:?}, reasons: {:?}",
            cond.m, cond.reasons
        )),
    );
    if !cond.holds {
        return Ok(());
    }
    // Zero-hitting identity on a small batch.
    let zero_hits: Result<Vec<_>, lamperti::LampertiError> =
        parallel_replicates(config.seed, 7, 50, |_, rng| {
            lamperti::zero_hit_time_check(
                &triplet,
                config.params.x.unwrap_or(1.0),
                config.params.tol.unwrap_or(1e-4),
                config.sim.step,
                rng,
            )
        })
        .into_iter()
        .collect();
    let zero_hits = zero_hits?;
    let exact = zero_hits.iter().filter(|r| r.exact).count();
    report.push(
        CheckOutcome::new("zero-hit-identity", exact == zero_hits.len(), 50, config.seed, 7)
            .with_detail(format!("{exact}/50 exact")),
    );
    // Overshoot behaviour of the dual.
    let depth = config.params.depth.unwrap_or(20.0);
    if !triplet.negate().has_negative_jumps() {
        let ratios: Result<Vec<f64>, ReversalError> =
            parallel_replicates(config.seed, 8, 50, |_, rng| {
                Ok(sample_gamma(&triplet, depth, config.sim.step, rng)?.ratio)
            })
            .into_iter()
            .collect();
        let degenerate = ratios?.iter().all(|&r| r == 1.0);
        report.push(
            CheckOutcome::new("overshoot-degenerate", degenerate, 50, config.seed, 8)
                .with_detail("continuous dual: ratio identically 1".to_string()),
        );
    } else if let JumpSpec::CompoundPoisson { law: JumpLaw::Exponential { rate }, .. } =
        triplet.jumps
    {
        if triplet.drift == 0.0 && triplet.gaussian_var == 0.0 {
            let sampled: Result<Vec<f64>, ReversalError> =
                parallel_replicates(config.seed, 8, 2000, |_, rng| {
                    Ok(sample_gamma(&triplet, depth, config.sim.step, rng)?.ratio)
                })
                .into_iter()
                .collect();
            let oracle: Vec<f64> =
                gamma_oracle_exponential(rate, 2000, &mut stream(config.seed, 9, 0))?
                    .iter()
                    .map(|g| g.ratio)
                    .collect();
            let ks = stats::ks_two_sample(&sampled?, &oracle)?;
            report.push(
                CheckOutcome::new("overshoot-vs-oracle", ks.p_value > 0.01, 2000, config.seed, 8)
                    .with_p(ks.statistic, ks.p_value),
            );
        }
    }
    // Mean of the exponential functional against the closed form.
    if let Some(exact) = expfun::analytic_mean_exp_integral(&triplet.negate()) {
        let samples: Result<Vec<f64>, ExpFunError> =
            parallel_replicates(config.seed, 10, 500, |_, rng| {
                Ok(sample_exp_integral(
                    &triplet.negate(),
                    config.params.tol.unwrap_or(1e-4),
                    config.sim.step,
                    rng,
                )?
                .value)
            })
            .into_iter()
            .collect();
        let samples = samples?;
        let mean = stats::mean(&samples);
        let se = stats::standard_error(&samples);
        report.push(
            CheckOutcome::new(
                "functional-mean",
                (mean - exact).abs() <= 5.0 * se + 0.01 * exact,
                500,
                config.seed,
                10,
            )
            .with_detail(format!("sample {mean:.5} vs exact {exact:.5}")),
        );
    }
    // Classifier spot checks on the analytic catalogue.
    let tail = TailModel::RegularVariation { gamma: 2.0, lambda: 1.0, log_power: 0.0 };
    let mut classifier_ok = true;
    for (c, side, expect) in [
        (0.4, Side::Zero, Outcome::Diverges),
        (0.75, Side::Zero, Outcome::Converges),
        (0.4, Side::Infinity, Outcome::Diverges),
        (0.75, Side::Infinity, Outcome::Converges),
    ] {
        let f = TestFunction::new(1.0, 1.0, -c, 0.0, side)?;
        let verdict = match side {
            Side::Zero => classify_at_zero(&tail, &f)?,
            Side::Infinity => classify_at_infinity(&tail, &f)?,
        };
        classifier_ok &= verdict.outcome == expect;
    }
    report.push(CheckOutcome::new("classifier-spot-checks", classifier_ok, 4, config.seed, 0));
    Ok(())
}
