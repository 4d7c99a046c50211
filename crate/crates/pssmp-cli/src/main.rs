//! `pssmp <experiment> --config <file> [--seed N] [--out DIR]`
//!
//! Runs one reproducible experiment and writes CSV/JSON artifacts plus a
//! `report.json` into the output directory. Exit code 0 iff every check
//! in the run passed. The output directory may also be set through the
//! `PSSMP_OUT` environment variable (the only env override).

use std::path::PathBuf;
use std::process::ExitCode;

use pssmp_cli::config::{ExperimentConfig, ExperimentKind};
use pssmp_cli::experiments;

fn usage() -> String {
    let kinds: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
    format!(
        "usage: pssmp <experiment> --config <file> [--seed N] [--out DIR]\n\
         experiments: {}",
        kinds.join(", ")
    )
}

struct Args {
    kind: ExperimentKind,
    config_path: PathBuf,
    seed: Option<u64>,
    out_dir: PathBuf,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let kind_name = argv.next().ok_or_else(usage)?;
    let kind = ExperimentKind::from_name(&kind_name)
        .ok_or_else(|| format!("unknown experiment '{kind_name}'\n{}", usage()))?;
    let mut config_path = None;
    let mut seed = None;
    let mut out_flag: Option<PathBuf> = None;
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                let v = argv.next().ok_or("--config needs a file path")?;
                config_path = Some(PathBuf::from(v));
            }
            "--seed" => {
                let v = argv.next().ok_or("--seed needs a value")?;
                seed = Some(v.parse::<u64>().map_err(|_| format!("bad seed '{v}'"))?);
            }
            "--out" => {
                let v = argv.next().ok_or("--out needs a directory")?;
                out_flag = Some(PathBuf::from(v));
            }
            other => return Err(format!("unknown flag '{other}'\n{}", usage())),
        }
    }
    let config_path = config_path.ok_or_else(|| format!("--config is required\n{}", usage()))?;
    let out_dir = out_flag
        .or_else(|| std::env::var_os("PSSMP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pssmp-out"));
    Ok(Args { kind, config_path, seed, out_dir })
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&args.config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config_path.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match ExperimentConfig::parse(&text, Some(args.kind)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    match experiments::run(&config, &args.out_dir) {
        Ok(report) => {
            println!(
                "run {} [{}] seed {} ({:.2}s)",
                report.kind, report.fingerprint, report.seed, report.wall_seconds
            );
            for o in &report.outcomes {
                let stats = match (o.p_value, o.ci) {
                    (Some(p), _) => format!(" p={p:.4}"),
                    (None, Some((lo, hi))) => format!(" ci=[{lo:.4}, {hi:.4}]"),
                    _ => String::new(),
                };
                println!(
                    "{} {}{}{}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    stats,
                    if o.detail.is_empty() {
                        String::new()
                    } else {
                        format!(" - {}", o.detail)
                    }
                );
            }
            println!(
                "artifacts in {}: {}",
                args.out_dir.display(),
                report.artifacts.join(", ")
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            ExitCode::from(2)
        }
    }
}
