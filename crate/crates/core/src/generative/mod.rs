//! Restricted Boltzmann machines trained by contrastive divergence, and a
//! small quantum Boltzmann machine trained on the relative entropy, each
//! with exact enumeration oracles.

mod qbm;
mod rbm;

pub use qbm::{
    pauli_x, pauli_y, pauli_z, qbm_gradient, qbm_state, qbm_two_qubit_task, random_density, relative_entropy,
    train_qbm, two_qubit_basis, QbmConfig, QbmModel, QbmReport, QbmTask, TWO_QUBIT_LABELS, MAX_QBM_DIM, MIN_SIGMA_EIGENVALUE,
};
pub use rbm::{
    cd1_expected_update, cd1_sample_update, cd1_update, cond_prob_h, cond_prob_v, exact_distribution, exact_joint,
    exact_log_likelihood_gradient, from_bits, gibbs_chain, rbm_cross_entropy, rbm_energy, rbm_kl, to_bits, train_rbm,
    BinaryBatch, GibbsChain, RbmConfig, RbmParams, RbmReport, RbmUpdate, MAX_ENUMERATION_UNITS, TWO_PEAK_TARGET,
};
