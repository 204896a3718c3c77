use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network, Optimizer};
use crate::numkit::{RngStream, C64};
use crate::qsim::{MeasurementKind, SmeConfig, LEAKAGE_THRESHOLD};
use crate::rl::BaselineMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Cavity feedback-control experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub sme: SmeConfig,
    pub cutoff: usize,
    /// Drive amplitude α_a for each discrete action.
    pub amplitudes: Vec<C64>,
    /// RL steps per episode.
    pub horizon: usize,
    /// Number of recent signal averages fed to the policy.
    pub window: usize,
    /// Fock level to stabilize.
    pub target: usize,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub baseline: BaselineMode,
    pub updates: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            sme: SmeConfig {
                kappa: 1.0,
                kappa_meas: 0.5,
                dt: 0.2,
                substeps: 330,
                measurement: MeasurementKind::Qnd,
            },
            cutoff: 10,
            amplitudes: uniform_grid(-0.75, 0.75, 9),
            horizon: 50,
            window: 10,
            target: 1,
            batch: 64,
            hidden: vec![64, 32],
            optimizer: OptimizerKind::Adam,
            learning_rate: 3e-3,
            baseline: BaselineMode::BatchMean,
            updates: 200,
        }
    }
}

/// `n` real amplitudes evenly spaced on [lo, hi].
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<C64> {
    if n < 2 {
        return vec![C64::new(lo, 0.0); n];
    }
    (0..n)
        .map(|k| C64::new(lo + (hi - lo) * k as f64 / (n - 1) as f64, 0.0))
        .collect()
}

impl ControlConfig {
    /// Largest |α| whose steady coherent field |β| = 2|α|/√κ keeps the
    /// Poisson population of the top Fock level at or below
    /// [`LEAKAGE_THRESHOLD`]. Zero when κ = 0, since any drive then grows
    /// without bound.
    pub fn amplitude_cap(&self) -> f64 {
        let top = self.cutoff.saturating_sub(1);
        if self.sme.kappa <= 0.0 || top == 0 {
            return 0.0;
        }
        let log_fact: f64 = (1..=top).map(|k| (k as f64).ln()).sum();
        let top_population = |lam: f64| (-lam + top as f64 * lam.ln() - log_fact).exp();
        // increasing on (0, top]
        let (mut lo, mut hi) = (0.0, top as f64);
        if top_population(hi) <= LEAKAGE_THRESHOLD {
            lo = hi;
        } else {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if top_population(mid) <= LEAKAGE_THRESHOLD {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        0.5 * self.sme.kappa.sqrt() * lo.sqrt()
    }

    /// Affine map (shift, scale) applied to per-step signal averages.
    pub fn observation_map(&self) -> (f64, f64) {
        let km = self.sme.kappa_meas;
        let shift = km.sqrt() * self.target as f64 * 2.0;
        let scale = if km > 0.0 {
            1.0 / (2.0 * (km / self.sme.dt).sqrt())
        } else {
            // pure noise of variance 1/Δt: normalize to unit variance
            self.sme.dt.sqrt()
        };
        (shift, scale)
    }

    pub fn validate(&self) -> Result<()> {
        self.sme.validate(self.cutoff)?;
        if self.amplitudes.len() < 2 {
            return Err(Error::InvalidArgument("at least two drive amplitudes are required".into()));
        }
        let cap = self.amplitude_cap();
        if let Some(a) = self.amplitudes.iter().find(|a| !(a.norm() <= cap)) {
            return Err(Error::InvalidArgument(format!(
                "drive amplitude {a} exceeds the leakage cap {cap:.3} for cutoff {}",
                self.cutoff
            )));
        }
        if self.window == 0 || self.horizon == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("window, horizon and batch must be positive".into()));
        }
        if self.target >= self.cutoff {
            return Err(Error::InvalidArgument(format!(
                "target level {} outside cutoff {}",
                self.target, self.cutoff
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layers must be non-empty".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    /// Dense relu stack ending in a softmax over the actions.
    pub fn policy_layers(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut n_in = self.window;
        for &h in &self.hidden {
            layers.push(LayerSpec::dense(n_in, h, Activation::Relu));
            n_in = h;
        }
        layers.push(LayerSpec::dense(n_in, self.amplitudes.len(), Activation::Softmax));
        layers
    }

    pub fn init_policy(&self, rng: &mut RngStream) -> Result<Network> {
        Network::new(self.policy_layers(), rng)
    }

    pub fn make_optimizer(&self) -> Optimizer {
        match self.optimizer {
            OptimizerKind::Sgd => Optimizer::sgd(self.learning_rate),
            OptimizerKind::Adam => Optimizer::adam(self.learning_rate),
        }
    }
}
