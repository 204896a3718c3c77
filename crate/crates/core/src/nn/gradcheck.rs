//! Finite-difference gradient checking.
//!
//! The numerical gradient here only ever calls `forward` and `loss_eval`,
//! never the backprop path it is compared against.

use super::layer::{Activation, LayerSpec, Padding};
use super::loss::{loss_eval, LossKind};
use super::network::Network;
use crate::error::Result;
use crate::numkit::{RngStream, Tensor};

/// Central differences of the batch loss with step `h`.
pub fn finite_difference_gradient(
    net: &Network,
    x: &Tensor,
    target: &Tensor,
    loss: LossKind,
    h: f64,
) -> Result<Vec<f64>> {
    let theta = net.flat_params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(theta.len());
    let mut shifted = theta.clone();
    for k in 0..theta.len() {
        shifted[k] = theta[k] + h;
        probe.set_flat_params(&shifted)?;
        let up = loss_eval(&probe.predict(x)?, target, loss)?.value;
        shifted[k] = theta[k] - h;
        probe.set_flat_params(&shifted)?;
        let down = loss_eval(&probe.predict(x)?, target, loss)?.value;
        shifted[k] = theta[k];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// |a - n| / max(1, |a|, |n|)
pub fn scale_aware_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Largest scale-aware error between backprop and central differences.
pub fn max_gradient_error(net: &Network, x: &Tensor, target: &Tensor, loss: LossKind, h: f64) -> Result<f64> {
    let analytic = net.backprop(&net.forward(x)?, target, loss)?.flat();
    let numeric = finite_difference_gradient(net, x, target, loss, h)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| scale_aware_error(a, n))
        .fold(0.0, f64::max))
}

/// A randomly drawn test problem for gradient checking.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub net: Network,
    pub loss: LossKind,
    pub input: Tensor,
    pub target: Tensor,
}

/// Draws a network of at most four layers and thirty units per dense layer,
/// cycling through every supported activation/loss pairing and, every third
/// case, a convolutional front end.
pub fn random_case(index: usize, rng: &mut RngStream) -> Result<GradCheckCase> {
    const HIDDEN: [Activation; 3] = [Activation::Sigmoid, Activation::Relu, Activation::Linear];
    const OUTPUT: [(Activation, LossKind); 4] = [
        (Activation::Sigmoid, LossKind::Quadratic),
        (Activation::Relu, LossKind::Quadratic),
        (Activation::Linear, LossKind::Quadratic),
        (Activation::Softmax, LossKind::CategoricalCrossEntropy),
    ];
    let (out_act, loss) = OUTPUT[index % OUTPUT.len()];
    let n_out = 2 + rng.index(4);
    let mut layers = Vec::new();
    let n_in;
    match index % 3 {
        2 => {
            let padding = if rng.index(2) == 0 { Padding::Zero } else { Padding::Periodic };
            let c_out = 1 + rng.index(3);
            if rng.index(2) == 0 {
                let len = 2 * (3 + rng.index(3));
                let c_in = 1 + rng.index(2);
                n_in = c_in * len;
                layers.push(LayerSpec::conv1d(c_in, c_out, 1, len, padding, HIDDEN[rng.index(3)]));
                layers.push(LayerSpec::avg_pool1d(c_out, len, 2));
                layers.push(LayerSpec::flatten(c_out * len / 2));
                layers.push(LayerSpec::dense(c_out * len / 2, n_out, out_act));
            } else {
                let side = 4;
                n_in = side * side;
                layers.push(LayerSpec::conv2d(1, c_out, 1, (side, side), padding, HIDDEN[rng.index(3)]));
                layers.push(LayerSpec::avg_pool2d(c_out, (side, side), 2));
                layers.push(LayerSpec::flatten(c_out * 4));
                layers.push(LayerSpec::dense(c_out * 4, n_out, out_act));
            }
        }
        _ => {
            let depth = 1 + rng.index(4);
            let mut width = 1 + rng.index(6);
            n_in = width;
            for _ in 0..depth - 1 {
                let next = 1 + rng.index(30);
                layers.push(LayerSpec::dense(width, next, HIDDEN[rng.index(3)]));
                width = next;
            }
            layers.push(LayerSpec::dense(width, n_out, out_act));
        }
    }
    let mut net = Network::new(layers, rng)?;
    // non-zero biases exercise the bias gradient
    let mut theta = net.flat_params();
    for t in theta.iter_mut() {
        if *t == 0.0 {
            *t = 0.1 * rng.gaussian_std();
        }
    }
    net.set_flat_params(&theta)?;
    let batch = 1 + rng.index(4);
    let input = Tensor::new(vec![batch, n_in], (0..batch * n_in).map(|_| rng.gaussian_std()).collect())?;
    let target = match loss {
        LossKind::CategoricalCrossEntropy => {
            let mut t = Tensor::zeros(vec![batch, n_out]);
            for s in 0..batch {
                if s % 2 == 0 {
                    t.set(s, rng.index(n_out), 1.0);
                } else {
                    let raw: Vec<f64> = (0..n_out).map(|_| rng.uniform01() + 0.05).collect();
                    let total: f64 = raw.iter().sum();
                    for (j, r) in raw.iter().enumerate() {
                        t.set(s, j, r / total);
                    }
                }
            }
            t
        }
        LossKind::Quadratic => Tensor::new(
            vec![batch, n_out],
            (0..batch * n_out).map(|_| rng.uniform01()).collect(),
        )?,
    };
    Ok(GradCheckCase {
        net,
        loss,
        input,
        target,
    })
}

/// Per-case maximum scale-aware errors over `n_cases` random architectures.
pub fn gradient_check_suite(n_cases: usize, seed: u64, h: f64) -> Result<Vec<f64>> {
    (0..n_cases)
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            let case = random_case(i, &mut rng)?;
            max_gradient_error(&case.net, &case.input, &case.target, case.loss, h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_random_architectures_match_finite_differences() {
        let errors = gradient_check_suite(20, 17, 1e-5).unwrap();
        for (i, e) in errors.iter().enumerate() {
            assert!(*e < 1e-5, "case {i}: {e}");
        }
    }

    #[test]
    fn random_three_layer_net() {
        let mut rng = RngStream::new(8, 0);
        let net = Network::new(
            vec![
                LayerSpec::dense(5, 12, Activation::Sigmoid),
                LayerSpec::dense(12, 7, Activation::Relu),
                LayerSpec::dense(7, 3, Activation::Linear),
            ],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::new(vec![4, 5], (0..20).map(|_| rng.gaussian_std()).collect()).unwrap();
        let t = Tensor::new(vec![4, 3], (0..12).map(|_| rng.gaussian_std()).collect()).unwrap();
        assert!(max_gradient_error(&net, &x, &t, LossKind::Quadratic, 1e-5).unwrap() < 1e-5);
    }

    #[test]
    fn cross_entropy_gradient_vanishes_at_target_distribution() {
        let mut rng = RngStream::new(9, 0);
        let net = Network::new(vec![LayerSpec::dense(3, 4, Activation::Softmax)], &mut rng).unwrap();
        let x = Tensor::new(vec![2, 3], (0..6).map(|_| rng.gaussian_std()).collect()).unwrap();
        let trace = net.forward(&x).unwrap();
        let target = trace.output().clone();
        let g = net.backprop(&trace, &target, LossKind::CategoricalCrossEntropy).unwrap();
        assert!(g.flat().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn scale_aware_metric() {
        assert_eq!(scale_aware_error(1e-3, 0.0), 1e-3);
        assert_eq!(scale_aware_error(200.0, 100.0), 0.5);
    }
}
