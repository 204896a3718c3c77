//! Small supervised exercises: XOR and 1-D function fitting.

use serde::{Deserialize, Serialize};

use super::layer::{Activation, LayerSpec};
use super::loss::LossKind;
use super::network::Network;
use super::optim::Optimizer;
use super::train::train_on_batch;
use crate::error::{Error, Result};
use crate::numkit::{RngStream, Tensor};

fn check_training(hidden: usize, steps: usize, learning_rate: f64) -> Result<()> {
    if hidden == 0 || steps == 0 {
        return Err(Error::InvalidArgument("hidden units and steps must be positive".into()));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {learning_rate}")));
    }
    Ok(())
}

fn fit(net: &mut Network, x: &Tensor, y: &Tensor, steps: usize, learning_rate: f64) -> Result<Vec<f64>> {
    let mut opt = Optimizer::adam(learning_rate);
    let mut curve = Vec::with_capacity(steps);
    for step in 0..steps {
        let loss = train_on_batch(net, x, y, LossKind::Quadratic, &mut opt)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: format!("loss became {loss}"),
            });
        }
        curve.push(loss);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XorConfig {
    pub hidden: usize,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for XorConfig {
    fn default() -> Self {
        XorConfig {
            hidden: 4,
            steps: 3000,
            learning_rate: 0.05,
        }
    }
}

impl XorConfig {
    pub fn validate(&self) -> Result<()> {
        check_training(self.hidden, self.steps, self.learning_rate)
    }
}

#[derive(Debug, Clone)]
pub struct TaskReport {
    pub network: Network,
    pub loss_curve: Vec<f64>,
    pub outputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// max |output − target| over the training inputs.
    pub max_error: f64,
}

fn report(network: Network, x: &Tensor, y: &Tensor, loss_curve: Vec<f64>) -> Result<TaskReport> {
    let outputs = network.predict(x)?.into_data();
    let targets = y.data().to_vec();
    let max_error = outputs.iter().zip(&targets).map(|(o, t)| (o - t).abs()).fold(0.0, f64::max);
    Ok(TaskReport {
        network,
        loss_curve,
        outputs,
        targets,
        max_error,
    })
}

/// 2 → hidden → 1 sigmoid network on the four XOR patterns.
pub fn train_xor(config: &XorConfig, seed: u64) -> Result<TaskReport> {
    config.validate()?;
    let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]])?;
    let y = Tensor::from_rows(&[vec![0.0], vec![1.0], vec![1.0], vec![0.0]])?;
    let mut net = Network::new(
        vec![
            LayerSpec::dense(2, config.hidden, Activation::Sigmoid),
            LayerSpec::dense(config.hidden, 1, Activation::Sigmoid),
        ],
        &mut RngStream::new(seed, 0),
    )?;
    let curve = fit(&mut net, &x, &y, config.steps, config.learning_rate)?;
    report(net, &x, &y, curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Func1dConfig {
    pub hidden: usize,
    /// Number of equally spaced grid points on [-1, 1].
    pub points: usize,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for Func1dConfig {
    fn default() -> Self {
        Func1dConfig {
            hidden: 30,
            points: 64,
            steps: 6000,
            learning_rate: 0.01,
        }
    }
}

impl Func1dConfig {
    pub fn validate(&self) -> Result<()> {
        check_training(self.hidden, self.steps, self.learning_rate)?;
        if self.points < 2 {
            return Err(Error::InvalidArgument("need at least 2 grid points".into()));
        }
        Ok(())
    }
}

/// Smooth target on [-1, 1].
pub fn func1d_target(x: f64) -> f64 {
    (std::f64::consts::PI * x).sin() + 0.5 * x * x
}

/// 1 → hidden (sigmoid) → 1 (linear) fit of [`func1d_target`] on a grid.
pub fn train_func1d(config: &Func1dConfig, seed: u64) -> Result<TaskReport> {
    config.validate()?;
    let n = config.points;
    let grid: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let x = Tensor::new(vec![n, 1], grid.clone())?;
    let y = Tensor::new(vec![n, 1], grid.iter().map(|&g| func1d_target(g)).collect())?;
    let mut net = Network::new(
        vec![
            LayerSpec::dense(1, config.hidden, Activation::Sigmoid),
            LayerSpec::dense(config.hidden, 1, Activation::Linear),
        ],
        &mut RngStream::new(seed, 0),
    )?;
    let curve = fit(&mut net, &x, &y, config.steps, config.learning_rate)?;
    report(net, &x, &y, curve)
}
