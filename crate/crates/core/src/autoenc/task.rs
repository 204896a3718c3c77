use serde::{Deserialize, Serialize};

use super::linear::{has_eigen_gap, train_linear_autoencoder, LinearAutoencoder};
use super::pca::{correlation_matrix, pca, pca_optimal_cost, PcaResult};
use crate::error::{Error, Result};
use crate::nn::Optimizer;
use crate::numkit::{RngStream, Tensor};

/// Centered Gaussian samples with variances `spectrum` along a random
/// orthonormal basis.
pub fn gaussian_with_spectrum(spectrum: &[f64], n: usize, rng: &mut RngStream) -> Tensor {
    let d = spectrum.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gaussian_std()).collect();
        for q in &basis {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|a| a / norm).collect());
    }
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let coeffs: Vec<f64> = spectrum.iter().map(|l| l.sqrt() * rng.gaussian_std()).collect();
        for i in 0..d {
            data.push((0..d).map(|k| coeffs[k] * basis[k][i]).sum());
        }
    }
    let mut t = Tensor::new(vec![n, d], data).expect("n·d entries");
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|s| t.get(s, j)).sum::<f64>() / n as f64).collect();
    for s in 0..n {
        for (x, m) in t.row_mut(s).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaTaskConfig {
    /// Variances of the synthetic data along a random orthonormal basis.
    pub spectrum: Vec<f64>,
    pub samples: usize,
    pub m_hidden: usize,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for PcaTaskConfig {
    fn default() -> Self {
        PcaTaskConfig {
            spectrum: vec![4.0, 3.0, 2.0, 0.5, 0.3, 0.1],
            samples: 500,
            m_hidden: 3,
            steps: 3000,
            learning_rate: 0.01,
        }
    }
}

impl PcaTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spectrum.is_empty() || self.spectrum.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument("spectrum must be non-empty and non-negative".into()));
        }
        if self.m_hidden == 0 || self.m_hidden > self.spectrum.len() {
            return Err(Error::InvalidArgument(format!(
                "m_hidden {} outside 1..={}",
                self.m_hidden,
                self.spectrum.len()
            )));
        }
        if self.samples < 2 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("need ≥ 2 samples and a positive learning rate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcaTaskReport {
    pub autoencoder: LinearAutoencoder,
    pub pca: PcaResult,
    pub optimal_cost: f64,
    /// (trained − optimal) / optimal, or the absolute excess when the optimum is 0.
    pub relative_gap: f64,
    /// None when the eigen-gap is too small for a subspace comparison.
    pub max_angle_deg: Option<f64>,
}

/// Linear autoencoder (Adam) against the PCA optimum of the sample
/// correlation matrix. Stream 0 draws the data, stream 1 drives training.
pub fn pca_task(config: &PcaTaskConfig, seed: u64) -> Result<PcaTaskReport> {
    config.validate()?;
    let data = gaussian_with_spectrum(&config.spectrum, config.samples, &mut RngStream::new(seed, 0));
    let p = pca(&correlation_matrix(&data)?.matrix, config.m_hidden)?;
    let optimal_cost = pca_optimal_cost(&p)?;
    let ae = train_linear_autoencoder(
        &data,
        config.m_hidden,
        &mut Optimizer::adam(config.learning_rate),
        config.steps,
        &mut RngStream::new(seed, 1),
    )?;
    let excess = ae.final_cost - optimal_cost;
    let relative_gap = if optimal_cost > 0.0 { excess / optimal_cost } else { excess };
    let max_angle_deg = if has_eigen_gap(&p) { ae.largest_principal_angle_deg(&p)? } else { None };
    Ok(PcaTaskReport {
        autoencoder: ae,
        pca: p,
        optimal_cost,
        relative_gap,
        max_angle_deg,
    })
}
