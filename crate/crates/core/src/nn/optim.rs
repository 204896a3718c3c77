use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

/// Gradient-descent rules. Both step against the supplied gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Optimizer {
    /// θ ← θ - η g
    Sgd { learning_rate: f64 },
    Adam(AdamState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// First and second moment estimates, flat and congruent to θ once used.
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer::Sgd { learning_rate }
    }

    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam(learning_rate: f64) -> Self {
        Optimizer::Adam(AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::Sgd { learning_rate } => *learning_rate,
            Optimizer::Adam(s) => s.learning_rate,
        }
    }

    /// Applies one update. Nothing is modified when a gradient entry is
    /// non-finite; the offending layer is reported instead.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::Shape("gradient does not match network".into()));
        }
        for (n, (g, p)) in grads.layers.iter().zip(net.params()).enumerate() {
            if g.weights.shape() != p.weights.shape() || g.biases.shape() != p.biases.shape() {
                return Err(Error::Shape(format!("gradient of layer {n} has the wrong shape")));
            }
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        let g = grads.flat();
        let mut theta = net.flat_params();
        match self {
            Optimizer::Sgd { learning_rate } => {
                for (t, gi) in theta.iter_mut().zip(&g) {
                    *t -= *learning_rate * gi;
                }
            }
            Optimizer::Adam(s) => {
                if s.first_moment.len() != theta.len() {
                    s.first_moment = vec![0.0; theta.len()];
                    s.second_moment = vec![0.0; theta.len()];
                    s.step = 0;
                }
                s.step += 1;
                let bc1 = 1.0 - s.beta1.powi(s.step as i32);
                let bc2 = 1.0 - s.beta2.powi(s.step as i32);
                for i in 0..theta.len() {
                    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * g[i];
                    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * g[i] * g[i];
                    let m_hat = s.first_moment[i] / bc1;
                    let v_hat = s.second_moment[i] / bc2;
                    theta[i] -= s.learning_rate * m_hat / (v_hat.sqrt() + s.epsilon);
                }
            }
        }
        net.set_flat_params(&theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{Activation, LayerParams, LayerSpec};
    use crate::numkit::Tensor;

    fn scalar_net(theta: f64) -> Network {
        // One linear unit with zero bias: θ is the single weight.
        Network::from_parts(
            vec![LayerSpec::dense(1, 1, Activation::Linear)],
            vec![LayerParams {
                weights: Tensor::new(vec![1, 1], vec![theta]).unwrap(),
                biases: Tensor::new(vec![1], vec![0.0]).unwrap(),
            }],
        )
        .unwrap()
    }

    fn grads(net: &Network, gw: f64) -> Gradients {
        let mut g = Gradients::zeros_like(net);
        g.layers[0].weights.data_mut()[0] = gw;
        g
    }

    #[test]
    fn sgd_arithmetic() {
        let mut net = scalar_net(1.0);
        let g = grads(&net, 2.0);
        Optimizer::sgd(0.1).step(&mut net, &g).unwrap();
        assert!((net.flat_params()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for mut opt in [Optimizer::sgd(0.3), Optimizer::adam(1e-3)] {
            let mut net = scalar_net(0.25);
            let g = grads(&net, 0.0);
            for _ in 0..3 {
                opt.step(&mut net, &g).unwrap();
            }
            assert_eq!(net.flat_params(), vec![0.25, 0.0]);
        }
    }

    #[test]
    fn sgd_quadratic_bowl_converges_geometrically() {
        // C = θ², g = 2θ, θ_k = (1 - 2η)^k θ_0.
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::sgd(0.1);
        let mut steps = 0;
        while net.flat_params()[0].abs() >= 1e-6 {
            let theta = net.flat_params()[0];
            let g = grads(&net, 2.0 * theta);
            opt.step(&mut net, &g).unwrap();
            steps += 1;
            assert!(steps <= 100);
        }
        assert_eq!(steps, (1e-6f64.ln() / 0.8f64.ln()).ceil() as usize);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(1e-3);
        let g = grads(&net, 5.0);
        opt.step(&mut net, &g).unwrap();
        assert!((net.flat_params()[0] - (1.0 - 1e-3)).abs() < 1e-9);
        let Optimizer::Adam(s) = &opt else { unreachable!() };
        assert_eq!(s.step, 1);
        assert_eq!(s.first_moment.len(), net.num_params());
    }

    #[test]
    fn non_finite_gradient_aborts_with_layer() {
        let mut net = scalar_net(1.0);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].biases.data_mut()[0] = f64::NAN;
        let before = net.clone();
        let err = Optimizer::adam(1e-3).step(&mut net, &g).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { layer: 0 });
        assert_eq!(net, before);
    }
}
