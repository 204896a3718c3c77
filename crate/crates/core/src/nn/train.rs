use super::loss::{loss_eval, LossKind};
use super::network::Network;
use super::optim::Optimizer;
use crate::error::{Error, Result};
use crate::numkit::{RngStream, Tensor};

/// One forward pass, backprop and optimizer step. Returns the batch loss
/// before the update.
pub fn train_on_batch(
    net: &mut Network,
    x: &Tensor,
    target: &Tensor,
    loss: LossKind,
    optimizer: &mut Optimizer,
) -> Result<f64> {
    if x.ndim() != 2 || x.rows() == 0 {
        return Err(Error::InvalidArgument("training batch is empty".into()));
    }
    let trace = net.forward(x)?;
    let before = loss_eval(trace.output(), target, loss)?.value;
    let grads = net.backprop(&trace, target, loss)?;
    optimizer.step(net, &grads)?;
    Ok(before)
}

/// Same as [`train_on_batch`] with dropout masks drawn from `rng`.
pub fn train_on_batch_with_dropout(
    net: &mut Network,
    x: &Tensor,
    target: &Tensor,
    loss: LossKind,
    optimizer: &mut Optimizer,
    rng: &mut RngStream,
) -> Result<f64> {
    let trace = net.forward_train(x, rng)?;
    let before = loss_eval(trace.output(), target, loss)?.value;
    let grads = net.backprop(&trace, target, loss)?;
    optimizer.step(net, &grads)?;
    Ok(before)
}

/// Early-stopping setup for [`fit_with_validation`].
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Fraction of the samples held out for validation, in (0, 1).
    pub split_fraction: f64,
    /// Epochs tolerated without a new best validation loss.
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// Checkpoint with the lowest validation loss.
    pub best: Network,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    /// Network as it stood when training ended.
    pub last: Network,
    pub train_curve: Vec<f64>,
    pub validation_curve: Vec<f64>,
    pub stopped_early: bool,
}

/// Trains with a held-out validation split and early stopping.
///
/// Samples are shuffled once with `rng`; the last `split_fraction` of them
/// form the validation set. Training halts after more than `patience`
/// consecutive epochs without a strictly lower validation loss.
pub fn fit_with_validation(
    net: &Network,
    x: &Tensor,
    y: &Tensor,
    config: &FitConfig,
    optimizer: &mut Optimizer,
    rng: &mut RngStream,
) -> Result<FitReport> {
    if !(config.split_fraction > 0.0 && config.split_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {} outside (0, 1)",
            config.split_fraction
        )));
    }
    if x.rows() != y.rows() {
        return Err(Error::Shape("inputs and targets differ in sample count".into()));
    }
    let n = x.rows();
    let n_val = (n as f64 * config.split_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} samples leaves {n_val} for validation"
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let (x_val, y_val) = (gather(x, val_idx)?, gather(y, val_idx)?);
    let (x_train, y_train) = (gather(x, train_idx)?, gather(y, train_idx)?);

    let mut net = net.clone();
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut train_curve = Vec::new();
    let mut validation_curve = Vec::new();
    let mut stopped_early = false;
    let mut epoch_order: Vec<usize> = (0..train_idx.len()).collect();

    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut epoch_order);
        for chunk in epoch_order.chunks(config.batch_size) {
            let bx = gather(&x_train, chunk)?;
            let by = gather(&y_train, chunk)?;
            let before = train_on_batch(&mut net, &bx, &by, config.loss, optimizer)?;
            if !before.is_finite() {
                return Err(Error::Divergence {
                    step: epoch,
                    detail: "training loss is not finite".into(),
                });
            }
        }
        let train_loss = loss_eval(&net.predict(&x_train)?, &y_train, config.loss)?.value;
        let val_loss = loss_eval(&net.predict(&x_val)?, &y_val, config.loss)?.value;
        train_curve.push(train_loss);
        validation_curve.push(val_loss);
        if val_loss < best_loss {
            best_loss = val_loss;
            best = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(FitReport {
        best,
        best_epoch,
        best_validation_loss: best_loss,
        last: net,
        train_curve,
        validation_curve,
        stopped_early,
    })
}

/// Rows of a 2-D tensor selected by index.
pub fn gather(t: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let c = t.cols();
    let mut data = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![idx.len(), c], data)
}
