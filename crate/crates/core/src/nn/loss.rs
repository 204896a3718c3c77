use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// Probabilities below this are clamped before taking the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Σ_j (y_j - t_j)² per sample.
    Quadratic,
    /// -Σ_j t_j ln P_j per sample.
    CategoricalCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Batch mean of the per-sample loss.
    pub value: f64,
    /// Number of probabilities clamped to [`LOG_CLAMP`].
    pub clamped: usize,
}

pub fn loss_eval(output: &Tensor, target: &Tensor, loss: LossKind) -> Result<LossValue> {
    if output.shape() != target.shape() || output.ndim() != 2 {
        return Err(Error::Shape(format!(
            "output {:?} against target {:?}",
            output.shape(),
            target.shape()
        )));
    }
    let batch = output.rows();
    if batch == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut clamped = 0;
    let total: f64 = match loss {
        LossKind::Quadratic => output
            .data()
            .iter()
            .zip(target.data())
            .map(|(y, t)| (y - t) * (y - t))
            .sum(),
        LossKind::CategoricalCrossEntropy => {
            let mut s = 0.0;
            for (&p, &t) in output.data().iter().zip(target.data()) {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "cross-entropy needs probabilities, got {p}"
                    )));
                }
                if t == 0.0 {
                    continue;
                }
                let q = if p < LOG_CLAMP {
                    clamped += 1;
                    LOG_CLAMP
                } else {
                    p
                };
                s -= t * q.ln();
            }
            s
        }
    };
    Ok(LossValue {
        value: total / batch as f64,
        clamped,
    })
}
