//! Policy gradient and tabular Q-learning on small discrete environments.

mod env;
mod policy;
mod qlearn;
mod train;

pub use env::{
    sample_trajectory, Environment, GridState, GridworldBoxEnv, Policy, Trajectory, Transition, WalkerEnv,
    WalkerState, WalkerTargetEnv, WalkerTargetState,
};
pub use policy::{
    policy_gradient_update, walker_analytic_update, walker_logpolicy_grad, BaselineMode, SigmoidPolicy,
    UpdateStats,
};
pub use qlearn::{
    compare_with_oracle, epsilon_greedy, optimal_actions, q_update, train_q_learning, value_iteration_oracle,
    OracleComparison, Outcome, QLearningConfig, QLearningReport, QTable, TabularMdp, MAX_STATES,
};
pub use train::{
    train_policy_gradient, train_walker, train_walker_target, walker_analytic_curve, walker_ensemble,
    UpdateRecord, WalkerConfig, WalkerEnsemble, WalkerTargetConfig, WalkerTargetReport,
};
