use serde::{Deserialize, Serialize};

use super::measure::{norm, sample_state_uniform, simulate_outcomes, BlochVector, MeasurementPlan};
use super::oracle::BayesOracle;
use crate::error::{Error, Result};
use crate::nn::{train_on_batch, Activation, LayerSpec, LossKind, Network, Optimizer};
use crate::numkit::{RngStream, Tensor};

const ORACLE_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Measurements along each of x, y and z.
    pub per_axis: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub test_size: usize,
    /// Prior samples per distinct outcome string in the Bayes oracle.
    pub n_mc: usize,
    pub log_every: usize,
    /// Project network outputs onto the unit ball before scoring.
    pub project_outputs: bool,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            per_axis: 4,
            hidden: vec![64, 64],
            steps: 4000,
            batch: 256,
            learning_rate: 1e-3,
            test_size: 20_000,
            n_mc: 100_000,
            log_every: 200,
            project_outputs: false,
        }
    }
}

impl ReconstructConfig {
    pub fn plan(&self) -> MeasurementPlan {
        MeasurementPlan::axis_balanced(self.per_axis)
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut n_in = 3 * self.per_axis;
        for &h in &self.hidden {
            layers.push(LayerSpec::dense(n_in, h, Activation::Relu));
            n_in = h;
        }
        layers.push(LayerSpec::dense(n_in, 3, Activation::Linear));
        layers
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("per_axis", self.per_axis),
            ("steps", self.steps),
            ("batch", self.batch),
            ("test_size", self.test_size),
            ("log_every", self.log_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for spec in self.layers() {
            spec.validate()?;
        }
        BayesOracle::new(self.plan(), self.n_mc, 0, 0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructLogRow {
    pub step: usize,
    /// Mean pre-update batch loss since the previous row.
    pub train_mse: f64,
    pub test_mse: f64,
    pub oracle_mse: f64,
}

impl ReconstructLogRow {
    pub const CSV_HEADER: &'static str = "step,train_mse,test_mse,oracle_mse";

    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{}", self.step, self.train_mse, self.test_mse, self.oracle_mse)
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub network: Network,
    pub log: Vec<ReconstructLogRow>,
    /// Mean training loss over the last tenth of the steps.
    pub train_mse: f64,
    pub test_mse: f64,
    pub oracle_mse: f64,
    /// Standard error of `oracle_mse` over the test set.
    pub oracle_se: f64,
    /// MSE of always answering the zero vector.
    pub baseline_mse: f64,
}

struct Samples {
    inputs: Tensor,
    outcomes: Vec<Vec<u8>>,
    states: Vec<BlochVector>,
}

fn draw(plan: &MeasurementPlan, n: usize, rng: &mut RngStream) -> Result<Samples> {
    let mut states = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * plan.len());
    for _ in 0..n {
        let y = sample_state_uniform(rng);
        let x = simulate_outcomes(&y, plan, rng)?;
        data.extend(x.iter().map(|&b| f64::from(b)));
        outcomes.push(x);
        states.push(y);
    }
    Ok(Samples {
        inputs: Tensor::new(vec![n, plan.len()], data)?,
        outcomes,
        states,
    })
}

fn targets(states: &[BlochVector]) -> Result<Tensor> {
    Tensor::new(vec![states.len(), 3], states.iter().flatten().copied().collect())
}

fn squared_errors(estimates: impl Iterator<Item = BlochVector>, states: &[BlochVector]) -> Vec<f64> {
    estimates
        .zip(states)
        .map(|(e, y)| (0..3).map(|k| (e[k] - y[k]).powi(2)).sum())
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn network_mse(net: &Network, test: &Samples, project: bool) -> Result<f64> {
    let out = net.predict(&test.inputs)?;
    let estimates = (0..out.rows()).map(|i| {
        let r = out.row(i);
        let mut e = [r[0], r[1], r[2]];
        let len = norm(&e);
        if project && len > 1.0 {
            e.iter_mut().for_each(|c| *c /= len);
        }
        e
    });
    Ok(mean(&squared_errors(estimates, &test.states)))
}

/// Trains on fresh (outcomes, Bloch vector) pairs with quadratic loss and
/// scores the network against the Bayes posterior mean on a held-out set.
/// Stream 0 initializes the network, 1 draws the test set, 2 the training
/// data; oracle streams start at 2^40.
pub fn train_reconstructor(config: &ReconstructConfig, seed: u64) -> Result<ReconstructReport> {
    train_reconstructor_with(config, seed, |_| {})
}

pub fn train_reconstructor_with(
    config: &ReconstructConfig,
    seed: u64,
    mut on_row: impl FnMut(&ReconstructLogRow),
) -> Result<ReconstructReport> {
    config.validate()?;
    let plan = config.plan();
    let mut net = Network::new(config.layers(), &mut RngStream::new(seed, 0))?;
    let test = draw(&plan, config.test_size, &mut RngStream::new(seed, 1))?;
    let mut oracle = BayesOracle::new(plan.clone(), config.n_mc, seed, ORACLE_STREAM_BASE)?;
    let oracle_errors = squared_errors(oracle.estimate_many(&test.outcomes)?.into_iter(), &test.states);
    let oracle_mse = mean(&oracle_errors);
    let var = oracle_errors.iter().map(|e| (e - oracle_mse).powi(2)).sum::<f64>() / (oracle_errors.len() - 1).max(1) as f64;
    let oracle_se = (var / oracle_errors.len() as f64).sqrt();
    let baseline_mse = mean(&test.states.iter().map(|y| norm(y).powi(2)).collect::<Vec<_>>());

    let mut optimizer = Optimizer::adam(config.learning_rate);
    let mut data_rng = RngStream::new(seed, 2);
    let mut log = Vec::new();
    let mut losses = Vec::with_capacity(config.steps);
    let mut since_row = Vec::new();
    for step in 1..=config.steps {
        let batch = draw(&plan, config.batch, &mut data_rng)?;
        let loss = train_on_batch(&mut net, &batch.inputs, &targets(&batch.states)?, LossKind::Quadratic, &mut optimizer)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: format!("training loss {loss}"),
            });
        }
        losses.push(loss);
        since_row.push(loss);
        if step % config.log_every == 0 || step == config.steps {
            let row = ReconstructLogRow {
                step,
                train_mse: mean(&since_row),
                test_mse: network_mse(&net, &test, config.project_outputs)?,
                oracle_mse,
            };
            since_row.clear();
            on_row(&row);
            log.push(row);
        }
    }
    let tail = (config.steps / 10).max(1);
    Ok(ReconstructReport {
        train_mse: mean(&losses[losses.len() - tail..]),
        test_mse: network_mse(&net, &test, config.project_outputs)?,
        network: net,
        log,
        oracle_mse,
        oracle_se,
        baseline_mse,
    })
}
