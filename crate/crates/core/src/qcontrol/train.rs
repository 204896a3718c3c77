use serde::{Deserialize, Serialize};

use super::config::ControlConfig;
use super::episode::{constant_drive_baseline, mean, run_episode_batch, EpisodeBatch};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Gradients, Network, Optimizer};
use crate::numkit::{RngStream, Tensor};
use crate::rl::BaselineMode;

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub update: usize,
    pub mean_return: f64,
    pub return_std: f64,
    pub mean_final_population: f64,
    /// P(target) averaged over every step of every trajectory.
    pub mean_population: f64,
    /// Mean over actions of the across-observation variance of π(a|s),
    /// over observations with a full signal window.
    pub policy_spread: f64,
    pub gradient_norm: f64,
    pub leakage_warnings: u64,
    pub action_histogram: Vec<u64>,
}

impl TrainLogRow {
    pub fn csv_header(num_actions: usize) -> String {
        let mut h = String::from(
            "update,mean_return,return_std,mean_final_population,mean_population,policy_spread,gradient_norm,leakage_warnings",
        );
        for a in 0..num_actions {
            h.push_str(&format!(",action_{a}"));
        }
        h
    }

    pub fn to_csv_row(&self) -> String {
        let mut r = format!(
            "{},{},{},{},{},{},{},{}",
            self.update,
            self.mean_return,
            self.return_std,
            self.mean_final_population,
            self.mean_population,
            self.policy_spread,
            self.gradient_norm,
            self.leakage_warnings
        );
        for c in &self.action_histogram {
            r.push_str(&format!(",{c}"));
        }
        r
    }
}

/// ∂ ln π(action | observation) / ∂θ, by backpropagating onehot − P
/// through the softmax.
pub fn log_policy_gradient(policy: &Network, observation: &[f64], action: usize) -> Result<Gradients> {
    let x = Tensor::new(vec![1, observation.len()], observation.to_vec())?;
    let trace = policy.forward(&x)?;
    let p = trace.output();
    if action >= p.cols() {
        return Err(Error::InvalidArgument(format!("action {action} outside {} outputs", p.cols())));
    }
    let mut delta = Tensor::zeros(vec![1, p.cols()]);
    for (a, d) in delta.row_mut(0).iter_mut().enumerate() {
        *d = if a == action { 1.0 } else { 0.0 } - p.get(0, a);
    }
    policy.backprop_from_output_delta(&trace, &delta)
}

/// Policy-gradient update on a batch produced by `policy`. The surrogate
/// −(1/N) Σ_τ (R_τ − b) Σ_t ln π(a_t|s_t) is descended, which ascends the
/// expected return.
pub fn reinforce_step(
    policy: &mut Network,
    optimizer: &mut Optimizer,
    batch: &EpisodeBatch,
    baseline: BaselineMode,
) -> Result<TrainLogRow> {
    if batch.episodes.is_empty() {
        return Err(Error::InvalidArgument("episode batch is empty".into()));
    }
    let n_actions = policy.output_size();
    let n_in = policy.input_size();
    let returns = batch.returns();
    if let Some(k) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFiniteTrajectory { trajectory: k });
    }
    // offset form: bit-exact when every return is equal
    let mean_return = returns[0] + returns.iter().map(|r| r - returns[0]).sum::<f64>() / returns.len() as f64;
    let b = match baseline {
        BaselineMode::Off => 0.0,
        BaselineMode::BatchMean => mean_return,
    };
    let n_traj = batch.episodes.len() as f64;
    let rows = batch.num_steps();
    let mut x = Vec::with_capacity(rows * n_in);
    for ep in &batch.episodes {
        if ep.observations.len() != ep.actions.len() {
            return Err(Error::Shape("episode has mismatched observations and actions".into()));
        }
        for obs in &ep.observations {
            if obs.len() != n_in {
                return Err(Error::Shape(format!("observation of length {} for input {n_in}", obs.len())));
            }
            x.extend_from_slice(obs);
        }
    }
    let x = Tensor::new(vec![rows, n_in], x)?;
    let trace = policy.forward(&x)?;
    let p = trace.output();
    let mut delta = Tensor::zeros(vec![rows, n_actions]);
    let mut histogram = vec![0u64; n_actions];
    let mut row = 0;
    for ep in &batch.episodes {
        let w = (ep.ret - b) / n_traj;
        for &a in &ep.actions {
            if a >= n_actions {
                return Err(Error::InvalidArgument(format!("action {a} outside {n_actions} outputs")));
            }
            histogram[a] += 1;
            for (j, d) in delta.row_mut(row).iter_mut().enumerate() {
                let onehot = if j == a { 1.0 } else { 0.0 };
                *d = w * (p.get(row, j) - onehot);
            }
            row += 1;
        }
    }
    // rows whose window is full of signal; earlier rows carry padding
    let full: Vec<usize> = batch
        .episodes
        .iter()
        .flat_map(|ep| 0..ep.actions.len())
        .enumerate()
        .filter(|&(_, t)| t >= n_in)
        .map(|(row, _)| row)
        .collect();
    let policy_spread = if full.is_empty() {
        probability_spread(p)
    } else {
        probability_spread(&crate::nn::gather(p, &full)?)
    };
    let grads = policy.backprop_from_output_delta(&trace, &delta)?;
    let gradient_norm = grads.norm();
    optimizer.step(policy, &grads)?;

    let var = returns.iter().map(|r| (r - mean_return).powi(2)).sum::<f64>() / n_traj;
    let all_rewards: Vec<f64> = batch.episodes.iter().flat_map(|e| e.rewards.iter().copied()).collect();
    Ok(TrainLogRow {
        update: 0,
        mean_return,
        return_std: var.sqrt(),
        mean_final_population: mean(&batch.episodes.iter().map(|e| e.final_population()).collect::<Vec<_>>()),
        mean_population: mean(&all_rewards),
        policy_spread,
        gradient_norm,
        leakage_warnings: batch.episodes.iter().map(|e| e.leakage_warnings).sum(),
        action_histogram: histogram,
    })
}

/// Mean over columns of the across-row variance of a probability table.
pub fn probability_spread(p: &Tensor) -> f64 {
    let (rows, cols) = (p.rows(), p.cols());
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..cols {
        let m = (0..rows).map(|i| p.get(i, j)).sum::<f64>() / rows as f64;
        total += (0..rows).map(|i| (p.get(i, j) - m).powi(2)).sum::<f64>() / rows as f64;
    }
    total / cols as f64
}

#[derive(Debug, Clone)]
pub struct ControlReport {
    pub log: Vec<TrainLogRow>,
    pub policy: Network,
    pub optimizer: Optimizer,
    /// Policy whose batch achieved the highest mean return.
    pub best_policy: Network,
    pub best_mean_return: f64,
    pub baseline_best_constant_drive: f64,
}

impl ControlReport {
    pub fn best_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.best_policy, None)
    }

    pub fn final_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.policy, Some(&self.optimizer))
    }

    /// Time-averaged P(target) over the last tenth of the updates.
    pub fn final_window_population(&self) -> f64 {
        let n = self.log.len();
        if n == 0 {
            return 0.0;
        }
        let w = (n / 10).max(1);
        mean(&self.log[n - w..].iter().map(|r| r.mean_population).collect::<Vec<_>>())
    }
}

/// Per-decile means of a logged series.
pub fn decile_means(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 10 {
        return vec![mean(values)];
    }
    (0..10)
        .map(|d| mean(&values[d * n / 10..(d + 1) * n / 10]))
        .collect()
}

/// Alternates batches and updates. Stream 0 initializes the policy;
/// trajectory k of update u uses stream 1 + u·batch + k.
pub fn train(config: &ControlConfig, seed: u64) -> Result<ControlReport> {
    train_with(config, seed, |_| {})
}

/// [`train`] with a callback invoked on every log row as it is produced.
pub fn train_with(config: &ControlConfig, seed: u64, mut on_row: impl FnMut(&TrainLogRow)) -> Result<ControlReport> {
    config.validate()?;
    let baseline = constant_drive_baseline(config)?;
    let mut policy = config.init_policy(&mut RngStream::new(seed, 0))?;
    let mut optimizer = config.make_optimizer();
    let mut best_policy = policy.clone();
    let mut best_mean_return = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(config.updates);
    for u in 0..config.updates {
        let first_stream = 1 + (u * config.batch) as u64;
        let batch = run_episode_batch(&policy, config, seed, first_stream)?;
        let snapshot = policy.clone();
        let mut row = reinforce_step(&mut policy, &mut optimizer, &batch, config.baseline)?;
        row.update = u;
        if row.mean_return > best_mean_return {
            best_mean_return = row.mean_return;
            best_policy = snapshot;
        }
        on_row(&row);
        log.push(row);
    }
    Ok(ControlReport {
        log,
        policy,
        optimizer,
        best_policy,
        best_mean_return,
        baseline_best_constant_drive: baseline.best,
    })
}
