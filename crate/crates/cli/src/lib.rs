//! Config-driven runner for the qflrl experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::time::Instant;

use serde_json::{json, Value};

pub use config::{Experiment, RawConfig, RunConfig};
pub use error::CliError;

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "QFLRL_THREADS";

/// Removes `threads` from the overrides and combines it with the
/// environment. None means machine parallelism.
pub fn take_threads(overrides: &mut Vec<(String, String)>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    let parse = |s: &str, from: &str| {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("{from} must be a positive integer, got {s:?}")))
    };
    let mut flag = None;
    while let Some(i) = overrides.iter().position(|(k, _)| k == "threads") {
        let (_, v) = overrides.remove(i);
        flag = Some(parse(&v, "--threads")?);
    }
    match env {
        Some(v) => Ok(Some(parse(v, THREADS_ENV)?)),
        None => Ok(flag),
    }
}

/// Runs one experiment and writes its files. On failure the caller
/// decides where the error record goes.
pub fn run(cfg: &RunConfig) -> Result<Value, CliError> {
    let start = Instant::now();
    log::info!("running {} with seed {} into {}", cfg.experiment, cfg.seed, cfg.out_dir.display());
    let out = experiments::run(cfg.experiment, &cfg.params, cfg.seed)?;
    let wall = start.elapsed().as_secs_f64();
    output::write_run(cfg, &out, wall)?;
    Ok(output::summary(cfg, &out, wall))
}

/// Validation report. With no experiment, every experiment's defaults are
/// echoed.
pub fn validate(raw: &RawConfig) -> Value {
    let check = |e: Experiment| -> (Value, Vec<Value>) {
        match experiments::violations(e, &raw.params) {
            Ok(v) => {
                let params = experiments::resolved_params(e, &raw.params).unwrap_or(Value::Null);
                (params, v.into_iter().map(|x| json!(x)).collect())
            }
            Err(err) => (Value::Null, vec![json!({ "rule": "parse", "message": err.to_string() })]),
        }
    };
    match raw.experiment {
        Some(e) => {
            let (params, violations) = check(e);
            json!({
                "valid": violations.is_empty(),
                "experiment": e.name(),
                "seed": raw.seed,
                "violations": violations,
                "config": { "experiment": e.name(), "seed": raw.seed, "params": params },
            })
        }
        None if raw.params.is_empty() => {
            let defaults: serde_json::Map<String, Value> =
                Experiment::ALL.iter().map(|e| (e.name().to_string(), check(*e).0)).collect();
            json!({
                "valid": true,
                "experiment": Value::Null,
                "seed": raw.seed,
                "violations": [],
                "config": { "seed": raw.seed, "defaults": defaults },
            })
        }
        None => json!({
            "valid": false,
            "experiment": Value::Null,
            "seed": raw.seed,
            "violations": [{ "rule": "experiment", "message": "params given without an experiment" }],
            "config": Value::Null,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(xs: &[(&str, &str)]) -> Vec<(String, String)> {
        xs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn environment_overrides_thread_flag() {
        let mut o = pairs(&[("threads", "3"), ("seed", "1")]);
        assert_eq!(take_threads(&mut o, None).unwrap(), Some(3));
        assert_eq!(o, pairs(&[("seed", "1")]));
        let mut o = pairs(&[("threads", "3")]);
        assert_eq!(take_threads(&mut o, Some("5")).unwrap(), Some(5));
        assert_eq!(take_threads(&mut Vec::new(), None).unwrap(), None);
        assert!(take_threads(&mut pairs(&[("threads", "0")]), None).is_err());
        assert!(take_threads(&mut Vec::new(), Some("many")).is_err());
    }

    #[test]
    fn empty_config_validates_with_full_defaults() {
        let report = validate(&RawConfig::default());
        assert_eq!(report["valid"], json!(true));
        let defaults = report["config"]["defaults"].as_object().unwrap();
        assert_eq!(defaults.len(), 12);
        assert_eq!(defaults["cavity"]["sme"]["substeps"], json!(330));
        assert_eq!(defaults["gradcheck"]["tolerance"], json!(1e-5));
    }

    #[test]
    fn unknown_param_is_reported_not_thrown() {
        let raw = config::from_table("experiment = \"xor\"\n[params]\nhiden = 3".parse().unwrap()).unwrap();
        let report = validate(&raw);
        assert_eq!(report["valid"], json!(false));
        assert_eq!(report["violations"][0]["rule"], json!("parse"));
    }
}
