use super::pca::{principal_angles, singular_values, PcaResult};
use crate::error::{Error, Result};
use crate::nn::{train_on_batch, Activation, LayerSpec, LossKind, Network, Optimizer};
use crate::numkit::{RngStream, Tensor};

/// Two linear dense layers d → M → d trained on the reconstruction cost
/// ⟨|x − w̃ w x|²⟩.
#[derive(Debug, Clone)]
pub struct LinearAutoencoder {
    pub net: Network,
    /// Cost before each update, followed by the cost after the last one.
    pub cost_curve: Vec<f64>,
    pub final_cost: f64,
}

pub fn train_linear_autoencoder(
    data: &Tensor,
    m_hidden: usize,
    optimizer: &mut Optimizer,
    steps: usize,
    rng: &mut RngStream,
) -> Result<LinearAutoencoder> {
    if data.ndim() != 2 || data.rows() < 2 {
        return Err(Error::InvalidArgument("need a batch of at least 2 samples".into()));
    }
    let d = data.cols();
    if m_hidden == 0 || m_hidden > d {
        return Err(Error::InvalidArgument(format!("bottleneck {m_hidden} outside 1..={d}")));
    }
    let mut net = Network::new(
        vec![
            LayerSpec::dense(d, m_hidden, Activation::Linear),
            LayerSpec::dense(m_hidden, d, Activation::Linear),
        ],
        rng,
    )?;
    let mut cost_curve = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        let cost = train_on_batch(&mut net, data, data, LossKind::Quadratic, optimizer)?;
        if !cost.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: format!("reconstruction cost became {cost}"),
            });
        }
        cost_curve.push(cost);
    }
    let final_cost = crate::nn::loss_eval(&net.predict(data)?, data, LossKind::Quadratic)?.value;
    if !final_cost.is_finite() {
        return Err(Error::Divergence {
            step: steps,
            detail: format!("reconstruction cost became {final_cost}"),
        });
    }
    cost_curve.push(final_cost);
    Ok(LinearAutoencoder {
        net,
        cost_curve,
        final_cost,
    })
}

impl LinearAutoencoder {
    pub fn m_hidden(&self) -> usize {
        self.net.layers()[0].output_size()
    }

    /// Columns of the decoder matrix w̃ (d × M), one vector per latent unit.
    pub fn decoder_columns(&self) -> Vec<Vec<f64>> {
        let w = &self.net.params()[1].weights;
        (0..w.cols()).map(|j| (0..w.rows()).map(|i| w.get(i, j)).collect()).collect()
    }

    /// w̃ w as d rows of length d.
    pub fn reconstruction_map(&self) -> Vec<Vec<f64>> {
        let enc = &self.net.params()[0].weights;
        let dec = &self.net.params()[1].weights;
        let (d, m) = (dec.rows(), dec.cols());
        (0..d)
            .map(|i| (0..d).map(|j| (0..m).map(|k| dec.get(i, k) * enc.get(k, j)).sum()).collect())
            .collect()
    }

    /// Singular values of w̃ w, descending.
    pub fn reconstruction_singular_values(&self) -> Result<Vec<f64>> {
        singular_values(&self.reconstruction_map())
    }

    /// Largest principal angle (degrees) between span(w̃) and the top
    /// eigenspace. `None` when λ_M − λ_{M+1} ≤ 0.1 λ_M, where the eigenspace
    /// is not well defined enough to compare against.
    pub fn largest_principal_angle_deg(&self, pca: &PcaResult) -> Result<Option<f64>> {
        let m = self.m_hidden();
        if pca.m_hidden != m {
            return Err(Error::InvalidArgument("PCA bottleneck differs from the network's".into()));
        }
        if !has_eigen_gap(pca) {
            return Ok(None);
        }
        let angles = principal_angles(&self.decoder_columns(), pca.top_subspace())?;
        Ok(angles.last().map(|a| a.to_degrees()))
    }
}

/// λ_M − λ_{M+1} > 0.1 λ_M
pub fn has_eigen_gap(pca: &PcaResult) -> bool {
    let m = pca.m_hidden;
    if m == 0 || m >= pca.eigenvalues.len() {
        return true;
    }
    let (hi, lo) = (pca.eigenvalues[m - 1], pca.eigenvalues[m]);
    hi - lo > 0.1 * hi
}

/// Σ_{j≠k} ⟨y_j y_k⟩² over the batch, using raw second moments.
pub fn decorrelation_penalty(latents: &Tensor) -> Result<f64> {
    if latents.ndim() != 2 || latents.rows() < 2 {
        return Err(Error::InvalidArgument("need a batch of at least 2 latent vectors".into()));
    }
    let (n, m) = (latents.rows(), latents.cols());
    let mut penalty = 0.0;
    for j in 0..m {
        for k in j + 1..m {
            let c = (0..n).map(|s| latents.get(s, j) * latents.get(s, k)).sum::<f64>() / n as f64;
            penalty += 2.0 * c * c;
        }
    }
    Ok(penalty)
}

#[cfg(test)]
mod tests {
    use super::super::pca::{correlation_matrix, pca, pca_optimal_cost};
    use super::super::task::gaussian_with_spectrum;
    use super::*;

    #[test]
    fn trained_autoencoder_matches_pca() {
        let mut rng = RngStream::new(11, 0);
        let data = gaussian_with_spectrum(&[4.0, 3.0, 2.0, 0.5, 0.3, 0.1], 500, &mut rng);
        let p = pca(&correlation_matrix(&data).unwrap().matrix, 3).unwrap();
        let optimum = pca_optimal_cost(&p).unwrap();
        let ae = train_linear_autoencoder(&data, 3, &mut Optimizer::adam(0.01), 3000, &mut rng).unwrap();
        assert!(ae.final_cost >= optimum - 1e-8);
        assert!((ae.final_cost - optimum) / optimum < 0.02, "{} vs {optimum}", ae.final_cost);
        let angle = ae.largest_principal_angle_deg(&p).unwrap().unwrap();
        assert!(angle < 5.0, "{angle}");
        let sv = ae.reconstruction_singular_values().unwrap();
        assert!(sv[3..].iter().all(|s| *s < 1e-6), "{sv:?}");
    }

    #[test]
    fn cost_never_beats_pca_bound() {
        let mut rng = RngStream::new(12, 0);
        let data = gaussian_with_spectrum(&[2.0, 1.0, 0.5, 0.25], 200, &mut rng);
        let p = pca(&correlation_matrix(&data).unwrap().matrix, 2).unwrap();
        let optimum = pca_optimal_cost(&p).unwrap();
        let ae = train_linear_autoencoder(&data, 2, &mut Optimizer::adam(0.02), 500, &mut rng).unwrap();
        assert!(ae.cost_curve.iter().all(|c| *c >= optimum - 1e-8));
    }

    #[test]
    fn small_gap_waives_angle_check() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 0.95]];
        let p = pca(&super::super::pca::CorrelationMatrix::from_rows(rows).unwrap(), 1).unwrap();
        assert!(!has_eigen_gap(&p));
    }

    #[test]
    fn divergent_learning_rate_aborts() {
        let mut rng = RngStream::new(13, 0);
        let data = gaussian_with_spectrum(&[100.0, 50.0], 50, &mut rng);
        let r = train_linear_autoencoder(&data, 1, &mut Optimizer::sgd(10.0), 200, &mut rng);
        assert!(r.is_err());
    }

    #[test]
    fn penalty_examples() {
        let single = Tensor::from_rows(&[vec![1.0], vec![-2.0]]).unwrap();
        assert_eq!(decorrelation_penalty(&single).unwrap(), 0.0);
        let copy = Tensor::from_rows(&[vec![1.0, 1.0], vec![-3.0, -3.0]]).unwrap();
        // ⟨y₁²⟩ = 5
        assert_eq!(decorrelation_penalty(&copy).unwrap(), 2.0 * 25.0);
    }

    #[test]
    fn independent_latents_have_small_penalty() {
        let mut rng = RngStream::new(14, 0);
        let n = 100_000;
        let t = Tensor::new(vec![n, 3], (0..3 * n).map(|_| rng.gaussian_std()).collect()).unwrap();
        assert!(decorrelation_penalty(&t).unwrap() < 1e-2);
    }

    proptest::proptest! {
        #[test]
        fn penalty_is_non_negative(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let t = Tensor::new(vec![4, 3], v).unwrap();
            proptest::prop_assert!(decorrelation_penalty(&t).unwrap() >= 0.0);
        }
    }
}
