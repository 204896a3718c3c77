//! Run configuration: a TOML file with `experiment`, `seed`, `out_dir` and a
//! `[params]` table, plus `--key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Gradcheck,
    Xor,
    Func1d,
    AutoencPca,
    Denoise,
    Walker,
    WalkerTarget,
    GridworldQ,
    Cavity,
    Rbm,
    Qbm,
    Reconstruct,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::Gradcheck,
        Experiment::Xor,
        Experiment::Func1d,
        Experiment::AutoencPca,
        Experiment::Denoise,
        Experiment::Walker,
        Experiment::WalkerTarget,
        Experiment::GridworldQ,
        Experiment::Cavity,
        Experiment::Rbm,
        Experiment::Qbm,
        Experiment::Reconstruct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Gradcheck => "gradcheck",
            Experiment::Xor => "xor",
            Experiment::Func1d => "func1d",
            Experiment::AutoencPca => "autoenc-pca",
            Experiment::Denoise => "denoise",
            Experiment::Walker => "walker",
            Experiment::WalkerTarget => "walker-target",
            Experiment::GridworldQ => "gridworld-q",
            Experiment::Cavity => "cavity",
            Experiment::Rbm => "rbm",
            Experiment::Qbm => "qbm",
            Experiment::Reconstruct => "reconstruct",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Gradcheck => "backprop against central finite differences on random architectures",
            Experiment::Xor => "one-hidden-layer sigmoid network on XOR",
            Experiment::Func1d => "one-hidden-layer fit of a smooth 1-D function",
            Experiment::AutoencPca => "linear autoencoder against the PCA optimum",
            Experiment::Denoise => "convolutional denoising autoencoder on synthetic disks",
            Experiment::Walker => "REINFORCE walker against the closed-form learning curve",
            Experiment::WalkerTarget => "REINFORCE walker that must stop on a target site",
            Experiment::GridworldQ => "tabular Q-learning on the box gridworld against value iteration",
            Experiment::Cavity => "REINFORCE feedback control of a measured cavity towards Fock state |1>",
            Experiment::Rbm => "CD-1 restricted Boltzmann machine on the two-peak distribution",
            Experiment::Qbm => "two-qubit quantum Boltzmann machine by relative-entropy descent",
            Experiment::Reconstruct => "qubit state reconstruction against the Bayes posterior mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const TOP_LEVEL: [&str; 4] = ["experiment", "seed", "out_dir", "params"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub params: Table,
}

/// Parsed file before the experiment is required.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub params: Table,
}

impl RawConfig {
    pub fn into_run(self) -> Result<RunConfig, CliError> {
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::Config("no experiment given".into()))?;
        let out_dir = self
            .out_dir
            .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", experiment.name(), self.seed)));
        Ok(RunConfig {
            experiment,
            seed: self.seed,
            out_dir,
            params: self.params,
        })
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(text: &str) -> Value {
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

/// Splits `--key=value` and `--key value` tokens into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(body) = arg.strip_prefix("--") else {
            return Err(CliError::Config(format!("unexpected argument {arg:?}; overrides look like --key=value")));
        };
        if let Some((k, v)) = body.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
        } else {
            let v = args
                .get(i + 1)
                .ok_or_else(|| CliError::Config(format!("override --{body} has no value")))?;
            out.push((body.to_string(), v.clone()));
            i += 2;
        }
        if out.last().is_some_and(|(k, _)| k.is_empty()) {
            return Err(CliError::Config("empty override key".into()));
        }
    }
    Ok(out)
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path crosses non-table key {p:?}")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Loads a config file, or treats `source` as an experiment name when no
/// such file exists, then applies overrides.
pub fn load(source: Option<&str>, overrides: &[(String, String)]) -> Result<RawConfig, CliError> {
    let mut table = match source {
        None => Table::new(),
        Some(s) if !Path::new(s).exists() && Experiment::from_name(s).is_some() => {
            let mut t = Table::new();
            t.insert("experiment".into(), Value::String(s.into()));
            t
        }
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
            text.parse::<Table>().map_err(|e| CliError::Config(format!("{path}: {e}")))?
        }
    };
    for (key, raw) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed override key {key:?}")));
        }
        let value = parse_value(raw);
        if TOP_LEVEL[..3].contains(&parts[0]) && parts.len() == 1 {
            table.insert(parts[0].to_string(), value);
        } else if parts[0] == "params" {
            set_path(&mut table, &parts, value)?;
        } else {
            let mut path = vec!["params"];
            path.extend(&parts);
            set_path(&mut table, &path, value)?;
        }
    }
    from_table(table)
}

pub fn from_table(mut table: Table) -> Result<RawConfig, CliError> {
    if let Some(k) = table.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
        return Err(CliError::Config(format!(
            "unknown top-level key {k:?}; expected one of {TOP_LEVEL:?}"
        )));
    }
    let experiment = match table.remove("experiment") {
        None => None,
        Some(Value::String(s)) => Some(Experiment::from_name(&s).ok_or_else(|| {
            CliError::Config(format!("unknown experiment {s:?}; see list-experiments"))
        })?),
        Some(v) => return Err(CliError::Config(format!("experiment must be a string, got {v}"))),
    };
    let seed = match table.remove("seed") {
        None => 0,
        Some(Value::Integer(i)) if i >= 0 => i as u64,
        Some(v) => return Err(CliError::Config(format!("seed must be a non-negative integer, got {v}"))),
    };
    let out_dir = match table.remove("out_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(CliError::Config(format!("out_dir must be a string, got {v}"))),
    };
    let params = match table.remove("params") {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(v) => return Err(CliError::Config(format!("params must be a table, got {v}"))),
    };
    Ok(RawConfig {
        experiment,
        seed,
        out_dir,
        params,
    })
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Experiment parameters: the user's table merged over the serialized
/// defaults, then parsed strictly.
pub fn resolve<T: Default + Serialize + DeserializeOwned>(params: &Table) -> Result<T, CliError> {
    let mut merged = Table::try_from(T::default()).map_err(|e| CliError::Config(format!("default parameters: {e}")))?;
    merge(&mut merged, params);
    Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("params: {}", e.message())))
}
