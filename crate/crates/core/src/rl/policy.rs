use serde::{Deserialize, Serialize};

use super::env::{Policy, Trajectory};
use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::numkit::RngStream;

/// Two-action tabular policy: in observation s the base action is taken
/// with probability σ(θ_s) and the other action otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidPolicy {
    pub theta: Vec<f64>,
    pub base_actions: Vec<usize>,
}

impl SigmoidPolicy {
    pub fn new(theta: Vec<f64>, base_actions: Vec<usize>) -> Result<Self> {
        if theta.len() != base_actions.len() || theta.is_empty() {
            return Err(Error::Shape("one base action per parameter is required".into()));
        }
        if base_actions.iter().any(|&a| a > 1) {
            return Err(Error::InvalidArgument("base actions must be 0 or 1".into()));
        }
        Ok(SigmoidPolicy { theta, base_actions })
    }

    pub fn num_observations(&self) -> usize {
        self.theta.len()
    }

    /// π(base action | s)
    pub fn base_probability(&self, observation: usize) -> f64 {
        sigmoid(self.theta[observation])
    }

    /// π(action | s)
    pub fn probability(&self, observation: usize, action: usize) -> f64 {
        let p = self.base_probability(observation);
        if action == self.base_actions[observation] {
            p
        } else {
            1.0 - p
        }
    }

    /// ∂ ln π(action | s) / ∂θ_s; the derivative with respect to every
    /// other parameter is zero.
    pub fn log_grad(&self, observation: usize, action: usize) -> f64 {
        let p = self.base_probability(observation);
        if action == self.base_actions[observation] {
            1.0 - p
        } else {
            -p
        }
    }

    /// Σ_t ∂_θ ln π(a_t | s_t) for one trajectory.
    pub fn trajectory_score(&self, traj: &Trajectory) -> Vec<f64> {
        let mut g = vec![0.0; self.theta.len()];
        for (&s, &a) in traj.observations.iter().zip(&traj.actions) {
            g[s] += self.log_grad(s, a);
        }
        g
    }
}

impl Policy for SigmoidPolicy {
    fn probabilities(&self, observation: usize) -> Vec<f64> {
        let p = self.base_probability(observation);
        let mut probs = vec![1.0 - p; 2];
        probs[self.base_actions[observation]] = p;
        probs
    }

    fn sample_action(&self, observation: usize, rng: &mut RngStream) -> usize {
        let base = self.base_actions[observation];
        if rng.uniform01() < self.base_probability(observation) {
            base
        } else {
            1 - base
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Raw return R.
    #[default]
    Off,
    /// R − ⟨R⟩ over the batch.
    BatchMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub mean_return: f64,
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
}

/// REINFORCE ascent step θ += η ⟨(R − b) Σ_t ∂_θ ln π(a_t|s_t)⟩ over the
/// batch, accumulated in trajectory order.
pub fn policy_gradient_update(
    trajs: &[Trajectory],
    policy: &mut SigmoidPolicy,
    learning_rate: f64,
    baseline: BaselineMode,
) -> Result<UpdateStats> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("policy-gradient batch is empty".into()));
    }
    let n = trajs.len() as f64;
    let mean_return = trajs.iter().map(|t| t.ret).sum::<f64>() / n;
    let b = match baseline {
        BaselineMode::Off => 0.0,
        BaselineMode::BatchMean => mean_return,
    };
    let mut gradient = vec![0.0; policy.theta.len()];
    for (k, traj) in trajs.iter().enumerate() {
        if traj.observations.iter().any(|&s| s >= policy.theta.len()) {
            return Err(Error::InvalidArgument(format!("trajectory {k} has an unknown observation")));
        }
        let weight = traj.ret - b;
        let score = policy.trajectory_score(traj);
        if !weight.is_finite() || score.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteTrajectory { trajectory: k });
        }
        for (g, s) in gradient.iter_mut().zip(score) {
            *g += weight * s / n;
        }
    }
    for (t, g) in policy.theta.iter_mut().zip(&gradient) {
        *t += learning_rate * g;
    }
    let gradient_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(UpdateStats {
        mean_return,
        gradient,
        gradient_norm,
    })
}

/// ∂_θ ln π_θ(action) for the walker with π_θ(+1) = σ(θ). `up` selects +1.
pub fn walker_logpolicy_grad(theta: f64, up: bool) -> f64 {
    let p = sigmoid(theta);
    if up {
        1.0 - p
    } else {
        -p
    }
}

/// Expected walker update δθ = 2ηTπ(1 − π) with π = σ(θ).
pub fn walker_analytic_update(learning_rate: f64, horizon: usize, theta: f64) -> Result<f64> {
    if horizon == 0 || !(learning_rate > 0.0) {
        return Err(Error::InvalidArgument("walker update needs T ≥ 1 and η > 0".into()));
    }
    let p = sigmoid(theta);
    Ok(2.0 * learning_rate * horizon as f64 * p * (1.0 - p))
}
