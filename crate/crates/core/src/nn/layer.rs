use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
    Softmax,
}

impl Activation {
    pub fn is_elementwise(self) -> bool {
        self != Activation::Softmax
    }

    /// y = f(z) for one sample.
    pub fn apply(self, z: &[f64], y: &mut [f64]) {
        match self {
            Activation::Sigmoid => {
                for (o, &v) in y.iter_mut().zip(z) {
                    *o = sigmoid(v);
                }
            }
            Activation::Relu => {
                for (o, &v) in y.iter_mut().zip(z) {
                    *o = v.max(0.0);
                }
            }
            Activation::Linear => y.copy_from_slice(z),
            Activation::Softmax => softmax(z, y),
        }
    }

    /// f'(z) for elementwise activations. ReLU uses f'(0) = 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let y = sigmoid(z);
                y * (1.0 - y)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Softmax => unreachable!("softmax has no elementwise derivative"),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64], y: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in y.iter_mut().zip(z) {
        *o = (v - m).exp();
        total += *o;
    }
    for o in y.iter_mut() {
        *o /= total;
    }
}

/// Boundary handling for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Zero,
    Periodic,
}

/// Layer geometry. Feature vectors are flattened channel-major:
/// `[channel][y][x]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Dense {
        n_in: usize,
        n_out: usize,
    },
    Conv1d {
        channels_in: usize,
        channels_out: usize,
        half_width: usize,
        length: usize,
        #[serde(default)]
        padding: Padding,
    },
    Conv2d {
        channels_in: usize,
        channels_out: usize,
        half_width: usize,
        height: usize,
        width: usize,
        #[serde(default)]
        padding: Padding,
    },
    AvgPool1d {
        channels: usize,
        length: usize,
        block: usize,
    },
    AvgPool2d {
        channels: usize,
        height: usize,
        width: usize,
        block: usize,
    },
    Flatten {
        size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
    /// Drop probability applied to this layer's outputs during training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
}

impl LayerSpec {
    pub fn dense(n_in: usize, n_out: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense { n_in, n_out },
            activation,
            dropout: None,
        }
    }

    pub fn conv1d(
        channels_in: usize,
        channels_out: usize,
        half_width: usize,
        length: usize,
        padding: Padding,
        activation: Activation,
    ) -> Self {
        LayerSpec {
            kind: LayerKind::Conv1d {
                channels_in,
                channels_out,
                half_width,
                length,
                padding,
            },
            activation,
            dropout: None,
        }
    }

    pub fn conv2d(
        channels_in: usize,
        channels_out: usize,
        half_width: usize,
        (height, width): (usize, usize),
        padding: Padding,
        activation: Activation,
    ) -> Self {
        LayerSpec {
            kind: LayerKind::Conv2d {
                channels_in,
                channels_out,
                half_width,
                height,
                width,
                padding,
            },
            activation,
            dropout: None,
        }
    }

    pub fn avg_pool1d(channels: usize, length: usize, block: usize) -> Self {
        LayerSpec {
            kind: LayerKind::AvgPool1d {
                channels,
                length,
                block,
            },
            activation: Activation::Linear,
            dropout: None,
        }
    }

    pub fn avg_pool2d(channels: usize, (height, width): (usize, usize), block: usize) -> Self {
        LayerSpec {
            kind: LayerKind::AvgPool2d {
                channels,
                height,
                width,
                block,
            },
            activation: Activation::Linear,
            dropout: None,
        }
    }

    pub fn flatten(size: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Flatten { size },
            activation: Activation::Linear,
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = Some(p);
        self
    }

    pub fn input_size(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_in, .. } => n_in,
            LayerKind::Conv1d {
                channels_in,
                length,
                ..
            } => channels_in * length,
            LayerKind::Conv2d {
                channels_in,
                height,
                width,
                ..
            } => channels_in * height * width,
            LayerKind::AvgPool1d {
                channels, length, ..
            } => channels * length,
            LayerKind::AvgPool2d {
                channels,
                height,
                width,
                ..
            } => channels * height * width,
            LayerKind::Flatten { size } => size,
        }
    }

    pub fn output_size(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_out, .. } => n_out,
            LayerKind::Conv1d {
                channels_out,
                length,
                ..
            } => channels_out * length,
            LayerKind::Conv2d {
                channels_out,
                height,
                width,
                ..
            } => channels_out * height * width,
            LayerKind::AvgPool1d {
                channels,
                length,
                block,
            } => channels * (length / block),
            LayerKind::AvgPool2d {
                channels,
                height,
                width,
                block,
            } => channels * (height / block) * (width / block),
            LayerKind::Flatten { size } => size,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Dense { n_in, n_out } => vec![n_out, n_in],
            LayerKind::Conv1d {
                channels_in,
                channels_out,
                half_width,
                ..
            } => vec![channels_out, channels_in, 2 * half_width + 1],
            LayerKind::Conv2d {
                channels_in,
                channels_out,
                half_width,
                ..
            } => {
                let k = 2 * half_width + 1;
                vec![channels_out, channels_in, k, k]
            }
            _ => vec![0],
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_out, .. } => n_out,
            LayerKind::Conv1d { channels_out, .. } | LayerKind::Conv2d { channels_out, .. } => {
                channels_out
            }
            _ => 0,
        }
    }

    /// Fan-in used for weight initialization.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_in, .. } => n_in,
            LayerKind::Conv1d {
                channels_in,
                half_width,
                ..
            } => channels_in * (2 * half_width + 1),
            LayerKind::Conv2d {
                channels_in,
                half_width,
                ..
            } => channels_in * (2 * half_width + 1).pow(2),
            _ => 0,
        }
    }

    pub fn has_params(&self) -> bool {
        self.bias_len() > 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self.kind {
            LayerKind::Dense { n_in, n_out } if n_in == 0 || n_out == 0 => {
                return bad("dense layer needs non-zero extents".into())
            }
            LayerKind::Conv1d {
                channels_in,
                channels_out,
                half_width,
                length,
                ..
            } if channels_in == 0 || channels_out == 0 || length == 0 || 2 * half_width + 1 > length => {
                return bad(format!("invalid conv1d geometry {:?}", self.kind))
            }
            LayerKind::Conv2d {
                channels_in,
                channels_out,
                half_width,
                height,
                width,
                ..
            } if channels_in == 0
                || channels_out == 0
                || 2 * half_width + 1 > height.min(width) =>
            {
                return bad(format!("invalid conv2d geometry {:?}", self.kind))
            }
            LayerKind::AvgPool1d { length, block, .. } if block == 0 || length % block != 0 => {
                return bad(format!("pool block {block} does not divide length {length}"))
            }
            LayerKind::AvgPool2d {
                height,
                width,
                block,
                ..
            } if block == 0 || height % block != 0 || width % block != 0 => {
                return bad(format!(
                    "pool block {block} does not divide {height}x{width}"
                ))
            }
            LayerKind::Flatten { size } if size == 0 => return bad("empty flatten".into()),
            _ => {}
        }
        if !self.has_params() && self.activation != Activation::Linear {
            return bad("pooling and flatten layers take no activation".into());
        }
        if let Some(p) = self.dropout {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout probability {p} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Weights and biases of one layer; empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Tensor,
    pub biases: Tensor,
}

impl LayerParams {
    pub fn zeros_for(spec: &LayerSpec) -> Self {
        if !spec.has_params() {
            return LayerParams {
                weights: Tensor::zeros(vec![0]),
                biases: Tensor::zeros(vec![0]),
            };
        }
        LayerParams {
            weights: Tensor::zeros(spec.weight_shape()),
            biases: Tensor::zeros(vec![spec.bias_len()]),
        }
    }

    /// Gaussian weights with std 1/sqrt(fan_in), zero biases.
    pub fn init(spec: &LayerSpec, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros_for(spec);
        if spec.has_params() {
            let std = 1.0 / (spec.fan_in() as f64).sqrt();
            for w in p.weights.data_mut() {
                *w = std * rng.gaussian_std();
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pre-activations of one layer for one sample.
pub(crate) fn layer_forward(spec: &LayerSpec, p: &LayerParams, x: &[f64], z: &mut [f64]) {
    let w = p.weights.data();
    let b = p.biases.data();
    match spec.kind {
        LayerKind::Dense { n_in, n_out } => {
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                z[j] = b[j] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        LayerKind::Conv1d {
            channels_in,
            channels_out,
            half_width,
            length,
            padding,
        } => {
            let k = 2 * half_width + 1;
            for o in 0..channels_out {
                for i in 0..length {
                    let mut acc = b[o];
                    for c in 0..channels_in {
                        let wk = &w[(o * channels_in + c) * k..(o * channels_in + c + 1) * k];
                        let xc = &x[c * length..(c + 1) * length];
                        for (t, &wv) in wk.iter().enumerate() {
                            if let Some(src) = shifted(i, t, half_width, length, padding) {
                                acc += wv * xc[src];
                            }
                        }
                    }
                    z[o * length + i] = acc;
                }
            }
        }
        LayerKind::Conv2d {
            channels_in,
            channels_out,
            half_width,
            height,
            width,
            padding,
        } => {
            let k = 2 * half_width + 1;
            let plane = height * width;
            for o in 0..channels_out {
                for r in 0..height {
                    for q in 0..width {
                        let mut acc = b[o];
                        for c in 0..channels_in {
                            let base = (o * channels_in + c) * k * k;
                            let xc = &x[c * plane..(c + 1) * plane];
                            for ty in 0..k {
                                let Some(sr) = shifted(r, ty, half_width, height, padding) else {
                                    continue;
                                };
                                for tx in 0..k {
                                    if let Some(sq) = shifted(q, tx, half_width, width, padding) {
                                        acc += w[base + ty * k + tx] * xc[sr * width + sq];
                                    }
                                }
                            }
                        }
                        z[o * plane + r * width + q] = acc;
                    }
                }
            }
        }
        LayerKind::AvgPool1d {
            channels,
            length,
            block,
        } => {
            let out_len = length / block;
            for c in 0..channels {
                for i in 0..out_len {
                    let s: f64 = x[c * length + i * block..c * length + (i + 1) * block]
                        .iter()
                        .sum();
                    z[c * out_len + i] = s / block as f64;
                }
            }
        }
        LayerKind::AvgPool2d {
            channels,
            height,
            width,
            block,
        } => {
            let (oh, ow) = (height / block, width / block);
            let norm = (block * block) as f64;
            for c in 0..channels {
                for r in 0..oh {
                    for q in 0..ow {
                        let mut s = 0.0;
                        for dr in 0..block {
                            for dq in 0..block {
                                s += x[c * height * width + (r * block + dr) * width + q * block + dq];
                            }
                        }
                        z[c * oh * ow + r * ow + q] = s / norm;
                    }
                }
            }
        }
        LayerKind::Flatten { .. } => z.copy_from_slice(x),
    }
}

/// Accumulates parameter gradients and writes dC/dx for one sample, given
/// dC/dz of this layer.
pub(crate) fn layer_backward(
    spec: &LayerSpec,
    p: &LayerParams,
    x: &[f64],
    dz: &[f64],
    grad: &mut LayerParams,
    dx: &mut [f64],
) {
    let w = p.weights.data();
    dx.iter_mut().for_each(|v| *v = 0.0);
    match spec.kind {
        LayerKind::Dense { n_in, n_out } => {
            let gw = grad.weights.data_mut();
            for j in 0..n_out {
                let d = dz[j];
                if d == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                let grow = &mut gw[j * n_in..(j + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * x[i];
                    dx[i] += d * row[i];
                }
            }
            for (g, d) in grad.biases.data_mut().iter_mut().zip(dz) {
                *g += d;
            }
        }
        LayerKind::Conv1d {
            channels_in,
            channels_out,
            half_width,
            length,
            padding,
        } => {
            let k = 2 * half_width + 1;
            for o in 0..channels_out {
                for i in 0..length {
                    let d = dz[o * length + i];
                    if d == 0.0 {
                        continue;
                    }
                    grad.biases.data_mut()[o] += d;
                    for c in 0..channels_in {
                        let base = (o * channels_in + c) * k;
                        for t in 0..k {
                            if let Some(src) = shifted(i, t, half_width, length, padding) {
                                grad.weights.data_mut()[base + t] += d * x[c * length + src];
                                dx[c * length + src] += d * w[base + t];
                            }
                        }
                    }
                }
            }
        }
        LayerKind::Conv2d {
            channels_in,
            channels_out,
            half_width,
            height,
            width,
            padding,
        } => {
            let k = 2 * half_width + 1;
            let plane = height * width;
            for o in 0..channels_out {
                for r in 0..height {
                    for q in 0..width {
                        let d = dz[o * plane + r * width + q];
                        if d == 0.0 {
                            continue;
                        }
                        grad.biases.data_mut()[o] += d;
                        for c in 0..channels_in {
                            let base = (o * channels_in + c) * k * k;
                            for ty in 0..k {
                                let Some(sr) = shifted(r, ty, half_width, height, padding) else {
                                    continue;
                                };
                                for tx in 0..k {
                                    if let Some(sq) = shifted(q, tx, half_width, width, padding) {
                                        let src = c * plane + sr * width + sq;
                                        grad.weights.data_mut()[base + ty * k + tx] += d * x[src];
                                        dx[src] += d * w[base + ty * k + tx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        LayerKind::AvgPool1d {
            channels,
            length,
            block,
        } => {
            let out_len = length / block;
            for c in 0..channels {
                for i in 0..out_len {
                    let d = dz[c * out_len + i] / block as f64;
                    for v in &mut dx[c * length + i * block..c * length + (i + 1) * block] {
                        *v = d;
                    }
                }
            }
        }
        LayerKind::AvgPool2d {
            channels,
            height,
            width,
            block,
        } => {
            let (oh, ow) = (height / block, width / block);
            let norm = (block * block) as f64;
            for c in 0..channels {
                for r in 0..oh {
                    for q in 0..ow {
                        let d = dz[c * oh * ow + r * ow + q] / norm;
                        for dr in 0..block {
                            for dq in 0..block {
                                dx[c * height * width + (r * block + dr) * width + q * block + dq] = d;
                            }
                        }
                    }
                }
            }
        }
        LayerKind::Flatten { .. } => dx.copy_from_slice(dz),
    }
}

/// Source index for kernel tap `t` at output position `i`, or None when it
/// falls into zero padding.
#[inline]
fn shifted(i: usize, t: usize, half_width: usize, len: usize, padding: Padding) -> Option<usize> {
    let pos = i as isize + t as isize - half_width as isize;
    if (0..len as isize).contains(&pos) {
        Some(pos as usize)
    } else {
        match padding {
            Padding::Zero => None,
            Padding::Periodic => Some(pos.rem_euclid(len as isize) as usize),
        }
    }
}
