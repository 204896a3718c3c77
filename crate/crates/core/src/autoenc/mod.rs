//! Linear autoencoders versus PCA, and a convolutional denoising autoencoder.

mod denoise;
mod linear;
mod pca;
mod task;

pub use denoise::{
    add_noise, denoising_network, denoising_task, noisy_pairs, random_disk, to_pgm, DenoiseConfig,
    DenoiseReport, ImageTriple,
};
pub use linear::{decorrelation_penalty, has_eigen_gap, train_linear_autoencoder, LinearAutoencoder};
pub use pca::{
    correlation_matrix, pca, pca_optimal_cost, principal_angles, singular_values, CorrelationEstimate,
    CorrelationMatrix, PcaResult, CENTERED_TOL,
};
pub use task::{gaussian_with_spectrum, pca_task, PcaTaskConfig, PcaTaskReport};
