//! Measurement-based feedback: a softmax policy network reads recent
//! measurement signal and picks a discrete drive amplitude, trained with
//! REINFORCE to stabilize a target Fock state.

mod config;
mod episode;
mod train;

pub use config::{uniform_grid, ControlConfig, OptimizerKind};
pub use episode::{
    action_probabilities, build_observation, constant_drive_baseline, constant_drive_population, run_episode,
    run_episode_batch, ConstantDriveBaseline, Episode, EpisodeBatch, COHERENT_CEILING,
};
pub use train::{
    decile_means, log_policy_gradient, probability_spread, reinforce_step, train, train_with, ControlReport,
    TrainLogRow,
};
