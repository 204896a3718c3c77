use rayon::prelude::*;

use super::config::ControlConfig;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::numkit::{RngStream, Tensor, C64};
use crate::qsim::{fock_overlap, FockDensityMatrix, SmeIntegrator};

/// The last `window` signal averages mapped by (c − shift)·scale, with zeros
/// on the left while the history is shorter than the window.
pub fn build_observation(history: &[f64], window: usize, shift: f64, scale: f64) -> Tensor {
    let mut data = vec![0.0; window];
    let take = history.len().min(window);
    for (d, &c) in data[window - take..].iter_mut().zip(&history[history.len() - take..]) {
        *d = (c - shift) * scale;
    }
    Tensor::new(vec![window], data).expect("length matches shape")
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Observation presented before each action.
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// P(target) after each RL step.
    pub rewards: Vec<f64>,
    pub ret: f64,
    pub leakage_warnings: u64,
}

impl Episode {
    pub fn final_population(&self) -> f64 {
        self.rewards.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBatch {
    pub episodes: Vec<Episode>,
}

impl EpisodeBatch {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.ret).collect()
    }

    pub fn mean_return(&self) -> f64 {
        mean(&self.returns())
    }

    pub fn num_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.actions.len()).sum()
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Action probabilities for a single observation.
pub fn action_probabilities(policy: &Network, observation: &Tensor) -> Result<Vec<f64>> {
    let x = observation.clone().reshape(vec![1, observation.len()])?;
    Ok(policy.predict(&x)?.into_data())
}

fn check_policy(policy: &Network, config: &ControlConfig) -> Result<()> {
    if policy.input_size() != config.window || policy.output_size() != config.amplitudes.len() {
        return Err(Error::Shape(format!(
            "policy maps {} -> {}, config needs {} -> {}",
            policy.input_size(),
            policy.output_size(),
            config.window,
            config.amplitudes.len()
        )));
    }
    if policy.output_activation() != crate::nn::Activation::Softmax {
        return Err(Error::InvalidArgument("policy output layer must be softmax".into()));
    }
    Ok(())
}

/// Simulates one trajectory from the vacuum with actions drawn from `policy`.
pub fn run_episode(policy: &Network, config: &ControlConfig, rng: &mut RngStream) -> Result<Episode> {
    let (shift, scale) = config.observation_map();
    let mut integ = SmeIntegrator::new(&config.sme, config.cutoff)?;
    let mut state = FockDensityMatrix::vacuum(config.cutoff)?;
    let mut history = Vec::with_capacity(config.horizon);
    let mut signal = Vec::with_capacity(config.sme.substeps);
    let mut ep = Episode {
        observations: Vec::with_capacity(config.horizon),
        actions: Vec::with_capacity(config.horizon),
        rewards: Vec::with_capacity(config.horizon),
        ret: 0.0,
        leakage_warnings: 0,
    };
    for _ in 0..config.horizon {
        let obs = build_observation(&history, config.window, shift, scale);
        let probs = action_probabilities(policy, &obs)?;
        let action = rng.categorical(&probs)?;
        signal.clear();
        integ.step(&mut state, config.amplitudes[action], rng, true, &mut signal)?;
        history.push(mean(&signal));
        let r = fock_overlap(&state, config.target)?;
        ep.observations.push(obs.into_data());
        ep.actions.push(action);
        ep.rewards.push(r);
    }
    ep.ret = ep.rewards.iter().sum();
    ep.leakage_warnings = integ.leakage_warnings;
    Ok(ep)
}

/// Simulates `config.batch` independent trajectories. Trajectory k uses
/// stream `first_stream + k` of `seed`.
pub fn run_episode_batch(policy: &Network, config: &ControlConfig, seed: u64, first_stream: u64) -> Result<EpisodeBatch> {
    config.validate()?;
    check_policy(policy, config)?;
    let results: Vec<Result<Episode>> = (0..config.batch)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(seed, first_stream + k as u64);
            run_episode(policy, config, &mut rng).map_err(|e| Error::InTrajectory {
                trajectory: k,
                source: Box::new(e),
            })
        })
        .collect();
    let episodes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EpisodeBatch { episodes })
}

/// Time-averaged P(target) of the deterministic (ensemble-mean) evolution
/// from the vacuum under a constant drive.
pub fn constant_drive_population(config: &ControlConfig, alpha: C64) -> Result<f64> {
    let mut integ = SmeIntegrator::new(&config.sme, config.cutoff)?;
    let mut state = FockDensityMatrix::vacuum(config.cutoff)?;
    let mut rng = RngStream::new(0, 0);
    let mut signal = Vec::with_capacity(config.sme.substeps);
    let mut total = 0.0;
    for _ in 0..config.horizon {
        signal.clear();
        integ.step(&mut state, alpha, &mut rng, false, &mut signal)?;
        total += fock_overlap(&state, config.target)?;
    }
    Ok(total / config.horizon as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDriveBaseline {
    /// Time-averaged P(target) for each grid amplitude.
    pub per_amplitude: Vec<f64>,
    pub best_action: usize,
    pub best: f64,
}

/// Best constant drive over the amplitude grid.
pub fn constant_drive_baseline(config: &ControlConfig) -> Result<ConstantDriveBaseline> {
    let per_amplitude = config
        .amplitudes
        .iter()
        .map(|&a| constant_drive_population(config, a))
        .collect::<Result<Vec<_>>>()?;
    let mut best_action = 0;
    for (k, &p) in per_amplitude.iter().enumerate() {
        if p > per_amplitude[best_action] {
            best_action = k;
        }
    }
    Ok(ConstantDriveBaseline {
        best: per_amplitude[best_action],
        best_action,
        per_amplitude,
    })
}

/// Steady-state P(|1⟩) of the best coherent state, max |β|² e^{−|β|²} = e^{−1}.
pub const COHERENT_CEILING: f64 = 0.367_879_441_171_442_3;
