//! Qubit state reconstruction from projective measurement outcomes.

mod measure;
mod oracle;
mod reconstruct;

pub use measure::{
    norm, outcome_probability, sample_state_uniform, simulate_outcomes, BlochVector,
    MeasurementPlan, UNIT_TOL,
};
pub use oracle::{bayes_oracle, BayesOracle, OracleEstimate, MIN_EFFECTIVE_SAMPLES, MIN_MC_SAMPLES};
pub use reconstruct::{train_reconstructor, train_reconstructor_with, ReconstructConfig, ReconstructLogRow, ReconstructReport};
