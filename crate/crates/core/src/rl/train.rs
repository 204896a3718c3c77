use serde::{Deserialize, Serialize};

use super::env::{sample_trajectory, Environment, WalkerEnv, WalkerTargetEnv};
use super::policy::{policy_gradient_update, walker_analytic_update, BaselineMode, SigmoidPolicy};
use crate::error::{Error, Result};
use crate::numkit::RngStream;

/// One CSV row per policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub step: usize,
    pub mean_return: f64,
    pub gradient_norm: f64,
    /// Base-action probability per observation after the update.
    pub probabilities: Vec<f64>,
}

impl UpdateRecord {
    pub fn csv_header(num_probabilities: usize) -> String {
        let mut cols = vec!["step".to_string(), "mean_return".into(), "gradient_norm".into()];
        cols.extend((0..num_probabilities).map(|s| format!("p_base_{s}")));
        cols.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let mut cols = vec![
            self.step.to_string(),
            self.mean_return.to_string(),
            self.gradient_norm.to_string(),
        ];
        cols.extend(self.probabilities.iter().map(f64::to_string));
        cols.join(",")
    }
}

/// Runs `updates` REINFORCE steps with `batch` trajectories each. Trajectory
/// j of update u draws from stream u·batch + j of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn train_policy_gradient<E: Environment>(
    env: &E,
    policy: &mut SigmoidPolicy,
    horizon: usize,
    updates: usize,
    batch: usize,
    learning_rate: f64,
    baseline: BaselineMode,
    seed: u64,
) -> Result<Vec<UpdateRecord>> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch must be positive".into()));
    }
    let mut records = Vec::with_capacity(updates);
    for u in 0..updates {
        let trajs = (0..batch)
            .map(|j| {
                let mut rng = RngStream::new(seed, (u * batch + j) as u64);
                sample_trajectory(env, &*policy, horizon, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = policy_gradient_update(&trajs, policy, learning_rate, baseline)?;
        records.push(UpdateRecord {
            step: u + 1,
            mean_return: stats.mean_return,
            gradient_norm: stats.gradient_norm,
            probabilities: (0..policy.num_observations()).map(|s| policy.base_probability(s)).collect(),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkerConfig {
    pub horizon: usize,
    pub learning_rate: f64,
    pub updates: usize,
    pub batch: usize,
    pub theta0: f64,
    pub baseline: BaselineMode,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        WalkerConfig {
            horizon: 20,
            learning_rate: 0.005,
            updates: 800,
            batch: 40,
            theta0: 0.0,
            baseline: BaselineMode::Off,
        }
    }
}

/// θ after each update (index 0 is θ0) for one seed.
pub fn train_walker(config: &WalkerConfig, seed: u64) -> Result<(Vec<f64>, Vec<UpdateRecord>)> {
    if config.batch == 0 {
        return Err(Error::InvalidArgument("batch must be positive".into()));
    }
    let env = WalkerEnv::new(config.horizon)?;
    let mut policy = SigmoidPolicy::new(vec![config.theta0], vec![WalkerEnv::UP])?;
    let mut thetas = vec![config.theta0];
    let mut records = Vec::with_capacity(config.updates);
    for u in 0..config.updates {
        let trajs = (0..config.batch)
            .map(|j| {
                let mut rng = RngStream::new(seed, (u * config.batch + j) as u64);
                sample_trajectory(&env, &policy, config.horizon, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = policy_gradient_update(&trajs, &mut policy, config.learning_rate, config.baseline)?;
        records.push(UpdateRecord {
            step: u + 1,
            mean_return: stats.mean_return,
            gradient_norm: stats.gradient_norm,
            probabilities: vec![policy.base_probability(0)],
        });
        thetas.push(policy.theta[0]);
    }
    Ok((thetas, records))
}

/// Iterates θ ← θ + 2ηTπ(1 − π).
pub fn walker_analytic_curve(config: &WalkerConfig) -> Result<Vec<f64>> {
    let mut theta = config.theta0;
    let mut out = vec![theta];
    for _ in 0..config.updates {
        theta += walker_analytic_update(config.learning_rate, config.horizon, theta)?;
        out.push(theta);
    }
    Ok(out)
}

/// Mean and standard error of θ across seeds after each update, next to
/// the closed-form iteration.
#[derive(Debug, Clone)]
pub struct WalkerEnsemble {
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub analytic: Vec<f64>,
}

impl WalkerEnsemble {
    /// Largest |mean − analytic| / SE over the given update indices.
    pub fn max_deviation_in_se(&self, checkpoints: &[usize]) -> f64 {
        checkpoints
            .iter()
            .map(|&k| {
                let d = (self.mean[k] - self.analytic[k]).abs();
                if self.standard_error[k] > 0.0 {
                    d / self.standard_error[k]
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn walker_ensemble(config: &WalkerConfig, seeds: &[u64]) -> Result<WalkerEnsemble> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument("need at least two seeds".into()));
    }
    let runs = seeds
        .iter()
        .map(|&s| train_walker(config, s).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let steps = config.updates + 1;
    let mut mean = vec![0.0; steps];
    let mut standard_error = vec![0.0; steps];
    for k in 0..steps {
        let m = runs.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean[k] = m;
        standard_error[k] = (var / n).sqrt();
    }
    Ok(WalkerEnsemble {
        mean,
        standard_error,
        analytic: walker_analytic_curve(config)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkerTargetConfig {
    pub x_max: i64,
    pub horizon: usize,
    pub learning_rate: f64,
    pub updates: usize,
    pub batch: usize,
    pub baseline: BaselineMode,
}

impl Default for WalkerTargetConfig {
    fn default() -> Self {
        WalkerTargetConfig {
            x_max: 10,
            horizon: 50,
            learning_rate: 0.01,
            updates: 600,
            batch: 32,
            baseline: BaselineMode::BatchMean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkerTargetReport {
    pub policy: SigmoidPolicy,
    pub records: Vec<UpdateRecord>,
}

impl WalkerTargetReport {
    /// π(move | off target)
    pub fn p_move_off_target(&self) -> f64 {
        self.policy.probability(0, WalkerTargetEnv::MOVE)
    }

    /// π(stay | on target)
    pub fn p_stay_on_target(&self) -> f64 {
        self.policy.probability(1, WalkerTargetEnv::STAY)
    }
}

/// Both sigmoids parameterize the probability to move, starting at 1/2.
pub fn train_walker_target(config: &WalkerTargetConfig, seed: u64) -> Result<WalkerTargetReport> {
    let env = WalkerTargetEnv::new(config.x_max, config.horizon)?;
    let mut policy = SigmoidPolicy::new(vec![0.0, 0.0], vec![WalkerTargetEnv::MOVE, WalkerTargetEnv::MOVE])?;
    let records = train_policy_gradient(
        &env,
        &mut policy,
        config.horizon,
        config.updates,
        config.batch,
        config.learning_rate,
        config.baseline,
        seed,
    )?;
    Ok(WalkerTargetReport { policy, records })
}
