//! Files written into the run directory.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::experiments::RunOutput;

/// Version of summary.json, error.json and non-network checkpoints.
pub const SCHEMA_VERSION: u32 = 1;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// The config as it was applied: top-level keys plus resolved params.
pub fn config_echo(cfg: &RunConfig, params: &Value) -> Value {
    json!({
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "out_dir": cfg.out_dir.display().to_string(),
        "params": params,
    })
}

pub fn summary(cfg: &RunConfig, out: &RunOutput, wall_clock_seconds: f64) -> Value {
    json!({
        "format_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config": config_echo(cfg, &out.params),
        "wall_clock_seconds": wall_clock_seconds,
        "metrics": out.metrics,
    })
}

pub fn write_run(cfg: &RunConfig, out: &RunOutput, wall_clock_seconds: f64) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write(dir, "metrics.csv", &out.csv)?;
    if let Some(cp) = &out.checkpoint {
        write(dir, "checkpoint.json", cp)?;
    }
    for (name, contents) in &out.files {
        write(dir, name, contents)?;
    }
    write(dir, "summary.json", &pretty(&summary(cfg, out, wall_clock_seconds)))
}

pub fn error_record(err: &CliError) -> Value {
    json!({
        "format_version": SCHEMA_VERSION,
        "status": "error",
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    })
}

/// Writes error.json when the directory can be created; the record also
/// goes to stderr either way.
pub fn write_error(dir: &Path, err: &CliError) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write(dir, "error.json", &pretty(&error_record(err)))
}
