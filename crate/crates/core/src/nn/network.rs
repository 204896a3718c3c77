use serde::{Deserialize, Serialize};

use super::layer::{layer_backward, layer_forward, Activation, LayerParams, LayerSpec};
use super::loss::LossKind;
use crate::error::{Error, Result};
use crate::numkit::{RngStream, Tensor};

/// Feedforward network: an ordered list of layers with their parameters.
///
/// The parameter vector θ is the concatenation, layer by layer, of the
/// weights (row-major) followed by the biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams>,
}

/// Pre-activations z and activations y of every layer for a batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Tensor,
    pub pre: Vec<Tensor>,
    pub post: Vec<Tensor>,
    /// Inverted-dropout scale factors applied to `post`, when active.
    pub masks: Vec<Option<Tensor>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.post.last().unwrap_or(&self.input)
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Gradient of a loss with respect to every parameter, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.layers.iter().map(LayerParams::zeros_for).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|p| p.weights.data().iter().chain(p.biases.data()))
            .copied()
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for p in &mut self.layers {
            p.weights.data_mut().iter_mut().for_each(|g| *g *= s);
            p.biases.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|p| !p.weights.is_finite() || !p.biases.is_finite())
    }
}

impl Network {
    /// Builds a network with Gaussian(0, 1/fan_in) weights and zero biases.
    pub fn new(layers: Vec<LayerSpec>, rng: &mut RngStream) -> Result<Self> {
        validate_layers(&layers)?;
        let params = layers.iter().map(|l| LayerParams::init(l, rng)).collect();
        Ok(Network { layers, params })
    }

    /// Assembles a network from explicit parameters.
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<LayerParams>) -> Result<Self> {
        validate_layers(&layers)?;
        if params.len() != layers.len() {
            return Err(Error::Shape(format!(
                "{} layers but {} parameter sets",
                layers.len(),
                params.len()
            )));
        }
        for (n, (l, p)) in layers.iter().zip(&params).enumerate() {
            let expect = LayerParams::zeros_for(l);
            if p.weights.shape() != expect.weights.shape() || p.biases.shape() != expect.biases.shape() {
                return Err(Error::Shape(format!(
                    "layer {n}: parameters {:?}/{:?} do not match {:?}/{:?}",
                    p.weights.shape(),
                    p.biases.shape(),
                    expect.weights.shape(),
                    expect.biases.shape()
                )));
            }
        }
        Ok(Network { layers, params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, LayerSpec::output_size)
    }

    pub fn output_activation(&self) -> Activation {
        self.layers.last().map_or(Activation::Linear, |l| l.activation)
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    /// θ as one flat vector.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.weights.data().iter().chain(p.biases.data()))
            .copied()
            .collect()
    }

    pub fn set_flat_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                theta.len()
            )));
        }
        let mut it = theta.iter();
        for p in &mut self.params {
            for v in p.weights.data_mut().iter_mut().chain(p.biases.data_mut()) {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Evaluation-mode forward pass (no dropout) over a batch `[batch, features]`.
    pub fn forward(&self, x: &Tensor) -> Result<ForwardTrace> {
        self.run_forward(x, None)
    }

    /// Training-mode forward pass: dropout masks are drawn from `rng`.
    pub fn forward_train(&self, x: &Tensor, rng: &mut RngStream) -> Result<ForwardTrace> {
        self.run_forward(x, Some(rng))
    }

    /// Network output only.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut trace = self.forward(x)?;
        Ok(trace.post.pop().unwrap_or_else(|| x.clone()))
    }

    fn run_forward(&self, x: &Tensor, mut rng: Option<&mut RngStream>) -> Result<ForwardTrace> {
        if x.ndim() != 2 || x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "input shape {:?} does not match input size {}",
                x.shape(),
                self.input_size()
            )));
        }
        let batch = x.rows();
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        for (spec, p) in self.layers.iter().zip(&self.params) {
            let input = post.last().unwrap_or(x);
            let n_out = spec.output_size();
            let mut z = Tensor::zeros(vec![batch, n_out]);
            let mut y = Tensor::zeros(vec![batch, n_out]);
            for s in 0..batch {
                layer_forward(spec, p, input.row(s), z.row_mut(s));
                spec.activation.apply(z.row(s), y.row_mut(s));
            }
            let mask = match (spec.dropout, rng.as_deref_mut()) {
                (Some(drop), Some(r)) if drop > 0.0 => {
                    let keep = 1.0 - drop;
                    let mut m = Tensor::zeros(vec![batch, n_out]);
                    for (mv, yv) in m.data_mut().iter_mut().zip(y.data_mut()) {
                        *mv = if r.uniform01() < keep { 1.0 / keep } else { 0.0 };
                        *yv *= *mv;
                    }
                    Some(m)
                }
                _ => None,
            };
            pre.push(z);
            post.push(y);
            masks.push(mask);
        }
        Ok(ForwardTrace {
            input: x.clone(),
            pre,
            post,
            masks,
        })
    }

    /// Gradient of the batch-mean loss with respect to every parameter.
    ///
    /// Runs the layerwise deviation-vector recursion: the output deviation
    /// is propagated down through M_lm = w_lm f'(z_m). Softmax outputs are
    /// only accepted with cross-entropy, whose output deviation is the fused
    /// P - P_target.
    pub fn backprop(&self, trace: &ForwardTrace, target: &Tensor, loss: LossKind) -> Result<Gradients> {
        let out = trace.output();
        if target.shape() != out.shape() {
            return Err(Error::Shape(format!(
                "target {:?} against output {:?}",
                target.shape(),
                out.shape()
            )));
        }
        let act = self.output_activation();
        let batch = out.rows() as f64;
        let mut dz = Tensor::zeros(out.shape().to_vec());
        match (loss, act) {
            (LossKind::Quadratic, Activation::Softmax) => {
                return Err(Error::Unsupported(
                    "softmax output with quadratic loss".into(),
                ))
            }
            (LossKind::CategoricalCrossEntropy, a) if a != Activation::Softmax => {
                return Err(Error::Unsupported(
                    "categorical cross-entropy requires a softmax output".into(),
                ))
            }
            (LossKind::CategoricalCrossEntropy, _) => {
                for s in 0..out.rows() {
                    let t_sum: f64 = target.row(s).iter().sum();
                    for ((d, &p), &t) in dz.row_mut(s).iter_mut().zip(out.row(s)).zip(target.row(s)) {
                        *d = (t_sum * p - t) / batch;
                    }
                }
            }
            (LossKind::Quadratic, a) => {
                let z = trace.pre.last().unwrap();
                for (((d, &y), &t), &zv) in dz
                    .data_mut()
                    .iter_mut()
                    .zip(out.data())
                    .zip(target.data())
                    .zip(z.data())
                {
                    *d = 2.0 * (y - t) / batch * a.derivative(zv);
                }
            }
        }
        self.backprop_from_output_delta(trace, &dz)
    }

    /// Backpropagates a caller-supplied dC/dz of the output layer.
    pub fn backprop_from_output_delta(&self, trace: &ForwardTrace, output_delta: &Tensor) -> Result<Gradients> {
        let n_layers = self.layers.len();
        if trace.pre.len() != n_layers {
            return Err(Error::Shape("trace does not belong to this network".into()));
        }
        if output_delta.shape() != trace.output().shape() {
            return Err(Error::Shape(format!(
                "output delta {:?} against output {:?}",
                output_delta.shape(),
                trace.output().shape()
            )));
        }
        if self.layers[n_layers - 1].dropout.is_some() && trace.masks[n_layers - 1].is_some() {
            return Err(Error::Unsupported("dropout on the output layer".into()));
        }
        let batch = trace.batch_size();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_delta.clone();
        for n in (0..n_layers).rev() {
            let spec = &self.layers[n];
            let input = if n == 0 { &trace.input } else { &trace.post[n - 1] };
            let mut dx = Tensor::zeros(vec![batch, spec.input_size()]);
            for s in 0..batch {
                layer_backward(
                    spec,
                    &self.params[n],
                    input.row(s),
                    delta.row(s),
                    &mut grads.layers[n],
                    dx.row_mut(s),
                );
            }
            if n == 0 {
                break;
            }
            // dC/dy of layer n-1 -> dC/dz of layer n-1
            let below = &self.layers[n - 1];
            if let Some(mask) = &trace.masks[n - 1] {
                for (d, m) in dx.data_mut().iter_mut().zip(mask.data()) {
                    *d *= m;
                }
            }
            if !below.activation.is_elementwise() {
                return Err(Error::Unsupported("softmax is only allowed on the output layer".into()));
            }
            for (d, &z) in dx.data_mut().iter_mut().zip(trace.pre[n - 1].data()) {
                *d *= below.activation.derivative(z);
            }
            delta = dx;
        }
        Ok(grads)
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("network needs at least one layer".into()));
    }
    for (n, l) in layers.iter().enumerate() {
        l.validate()
            .map_err(|e| Error::InvalidArgument(format!("layer {n}: {e}")))?;
        if l.activation == Activation::Softmax && n + 1 != layers.len() {
            return Err(Error::InvalidArgument(format!(
                "layer {n}: softmax is only permitted on the output layer"
            )));
        }
    }
    if layers.last().unwrap().dropout.is_some() {
        return Err(Error::InvalidArgument("dropout is not allowed on the output layer".into()));
    }
    for (n, pair) in layers.windows(2).enumerate() {
        if pair[0].output_size() != pair[1].input_size() {
            return Err(Error::Shape(format!(
                "layer {n} emits {} features but layer {} expects {}",
                pair[0].output_size(),
                n + 1,
                pair[1].input_size()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Padding;
    use crate::nn::loss::loss_eval;

    fn batch(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_sigmoid_neuron_outputs_half() {
        let mut rng = RngStream::new(0, 0);
        let mut net = Network::new(vec![LayerSpec::dense(3, 1, Activation::Sigmoid)], &mut rng).unwrap();
        net.set_flat_params(&[0.0; 4]).unwrap();
        let out = net.predict(&batch(&[vec![1.0, -7.0, 3.0], vec![0.0, 0.0, 0.0]])).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn relu_clips_negative_preactivation() {
        let net = Network::from_parts(
            vec![LayerSpec::dense(1, 1, Activation::Relu)],
            vec![LayerParams {
                weights: Tensor::new(vec![1, 1], vec![1.0]).unwrap(),
                biases: Tensor::new(vec![1], vec![0.0]).unwrap(),
            }],
        )
        .unwrap();
        let trace = net.forward(&batch(&[vec![-1.0]])).unwrap();
        assert_eq!(trace.pre[0].data(), &[-1.0]);
        assert_eq!(trace.output().data(), &[0.0]);
    }

    #[test]
    fn softmax_equal_inputs_is_uniform() {
        let mut rng = RngStream::new(0, 0);
        let mut net = Network::new(vec![LayerSpec::dense(2, 5, Activation::Softmax)], &mut rng).unwrap();
        let n = net.num_params();
        net.set_flat_params(&vec![0.0; n]).unwrap();
        let out = net.predict(&batch(&[vec![3.0, 1.0]])).unwrap();
        assert!(out.data().iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn softmax_rows_normalized_and_positive() {
        let mut rng = RngStream::new(1, 0);
        let net = Network::new(
            vec![
                LayerSpec::dense(4, 6, Activation::Relu),
                LayerSpec::dense(6, 7, Activation::Softmax),
            ],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::new(vec![5, 4], (0..20).map(|i| (i as f64 * 0.37).sin() * 30.0).collect()).unwrap();
        let out = net.predict(&x).unwrap();
        for s in 0..5 {
            let sum: f64 = out.row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(out.row(s).iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn single_linear_neuron_gradient_by_hand() {
        let net = Network::from_parts(
            vec![LayerSpec::dense(1, 1, Activation::Linear)],
            vec![LayerParams {
                weights: Tensor::new(vec![1, 1], vec![0.7]).unwrap(),
                biases: Tensor::new(vec![1], vec![-0.2]).unwrap(),
            }],
        )
        .unwrap();
        let x = batch(&[vec![1.5]]);
        let t = batch(&[vec![0.4]]);
        let trace = net.forward(&x).unwrap();
        let y = 0.7 * 1.5 - 0.2;
        let g = net.backprop(&trace, &t, LossKind::Quadratic).unwrap().flat();
        assert!((g[0] - 2.0 * (y - 0.4) * 1.5).abs() < 1e-15);
        assert!((g[1] - 2.0 * (y - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut rng = RngStream::new(2, 0);
        let net = Network::new(
            vec![
                LayerSpec::dense(3, 4, Activation::Sigmoid),
                LayerSpec::dense(4, 2, Activation::Linear),
            ],
            &mut rng,
        )
        .unwrap();
        let x = batch(&[vec![0.1, 0.2, 0.3]]);
        let trace = net.forward(&x).unwrap();
        let target = trace.output().clone();
        let g = net.backprop(&trace, &target, LossKind::Quadratic).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unsupported_pairings_rejected() {
        let mut rng = RngStream::new(3, 0);
        let soft = Network::new(vec![LayerSpec::dense(2, 3, Activation::Softmax)], &mut rng).unwrap();
        let x = batch(&[vec![1.0, 2.0]]);
        let t = batch(&[vec![1.0, 0.0, 0.0]]);
        let trace = soft.forward(&x).unwrap();
        assert!(matches!(soft.backprop(&trace, &t, LossKind::Quadratic), Err(Error::Unsupported(_))));

        let lin = Network::new(vec![LayerSpec::dense(2, 3, Activation::Linear)], &mut rng).unwrap();
        let trace = lin.forward(&x).unwrap();
        assert!(matches!(
            lin.backprop(&trace, &t, LossKind::CategoricalCrossEntropy),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn softmax_hidden_layer_rejected() {
        let mut rng = RngStream::new(3, 0);
        let r = Network::new(
            vec![
                LayerSpec::dense(2, 3, Activation::Softmax),
                LayerSpec::dense(3, 1, Activation::Linear),
            ],
            &mut rng,
        );
        assert!(r.is_err());
    }

    #[test]
    fn incompatible_layers_rejected() {
        let mut rng = RngStream::new(3, 0);
        let r = Network::new(
            vec![
                LayerSpec::dense(2, 3, Activation::Relu),
                LayerSpec::dense(4, 1, Activation::Linear),
            ],
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
        let bad_pool = Network::new(vec![LayerSpec::avg_pool1d(1, 10, 3)], &mut rng);
        assert!(bad_pool.is_err());
    }

    #[test]
    fn input_shape_mismatch_rejected() {
        let mut rng = RngStream::new(3, 0);
        let net = Network::new(vec![LayerSpec::dense(2, 1, Activation::Linear)], &mut rng).unwrap();
        assert!(matches!(net.forward(&batch(&[vec![1.0, 2.0, 3.0]])), Err(Error::Shape(_))));
    }

    #[test]
    fn periodic_conv_is_translation_equivariant() {
        let mut rng = RngStream::new(4, 0);
        let len = 12;
        let net = Network::new(
            vec![LayerSpec::conv1d(2, 3, 2, len, Padding::Periodic, Activation::Linear)],
            &mut rng,
        )
        .unwrap();
        let x: Vec<f64> = (0..2 * len).map(|_| rng.gaussian_std()).collect();
        let shift = |v: &[f64], channels: usize| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for c in 0..channels {
                for i in 0..len {
                    out[c * len + (i + 1) % len] = v[c * len + i];
                }
            }
            out
        };
        let z = net.forward(&Tensor::new(vec![1, 2 * len], x.clone()).unwrap()).unwrap().pre[0].clone();
        let z_shifted = net
            .forward(&Tensor::new(vec![1, 2 * len], shift(&x, 2)).unwrap())
            .unwrap()
            .pre[0]
            .clone();
        assert_eq!(shift(z.data(), 3), z_shifted.data());
    }

    #[test]
    fn avg_pool_averages_disjoint_blocks() {
        let mut rng = RngStream::new(0, 0);
        let net = Network::new(vec![LayerSpec::avg_pool2d(1, (2, 4), 2)], &mut rng).unwrap();
        let x = batch(&[vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0]]);
        assert_eq!(net.predict(&x).unwrap().data(), &[2.0, 6.0]);
    }

    #[test]
    fn dropout_mask_scales_kept_units() {
        let mut rng = RngStream::new(5, 0);
        let net = Network::new(
            vec![
                LayerSpec::dense(3, 50, Activation::Sigmoid).with_dropout(0.5),
                LayerSpec::dense(50, 1, Activation::Linear),
            ],
            &mut rng,
        )
        .unwrap();
        let x = batch(&[vec![0.3, -0.1, 0.2]]);
        let eval = net.forward(&x).unwrap();
        let train = net.forward_train(&x, &mut rng).unwrap();
        let mask = train.masks[0].as_ref().unwrap();
        for k in 0..50 {
            let m = mask.data()[k];
            assert!(m == 0.0 || m == 2.0);
            assert_eq!(train.post[0].data()[k], eval.post[0].data()[k] * m);
        }
        // Gradient with a frozen mask equals finite differences of the masked net.
        let t = batch(&[vec![0.9]]);
        let g = net.backprop(&train, &t, LossKind::Quadratic).unwrap().flat();
        let theta = net.flat_params();
        let h = 1e-6;
        let masked_loss = |th: &[f64]| {
            let mut n2 = net.clone();
            n2.set_flat_params(th).unwrap();
            let mut hidden = n2.forward(&x).unwrap().post[0].clone();
            for (y, m) in hidden.data_mut().iter_mut().zip(mask.data()) {
                *y *= m;
            }
            let mut out = Tensor::zeros(vec![1, 1]);
            layer_forward(&n2.layers()[1], &n2.params()[1], hidden.row(0), out.row_mut(0));
            loss_eval(&out, &t, LossKind::Quadratic).unwrap().value
        };
        for k in [0, 7, 60, theta.len() - 1] {
            let mut p = theta.clone();
            p[k] += h;
            let up = masked_loss(&p);
            p[k] -= 2.0 * h;
            let down = masked_loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0), "k={k}: {fd} vs {}", g[k]);
        }
    }
}
