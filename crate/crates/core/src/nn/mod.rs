//! Feedforward networks with exact backpropagation.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;
mod tasks;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use gradcheck::{
    finite_difference_gradient, gradient_check_suite, max_gradient_error, random_case,
    scale_aware_error, GradCheckCase,
};
pub use layer::{sigmoid, softmax, Activation, LayerKind, LayerParams, LayerSpec, Padding};
pub use loss::{loss_eval, LossKind, LossValue, LOG_CLAMP};
pub use network::{ForwardTrace, Gradients, Network};
pub use optim::{AdamState, Optimizer};
pub use train::{
    fit_with_validation, gather, train_on_batch, train_on_batch_with_dropout, FitConfig,
    FitReport,
};
pub use tasks::{func1d_target, train_func1d, train_xor, Func1dConfig, TaskReport, XorConfig};
