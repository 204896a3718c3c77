use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{hermitian_eig, ComplexMatrix, RngStream, C64, HERMITIAN_TOL, I, ONE, ZERO};

pub const MAX_QBM_DIM: usize = 16;
/// Smallest admissible eigenvalue of σ in the relative entropy.
pub const MIN_SIGMA_EIGENVALUE: f64 = 1e-14;
const EIG_TOL: f64 = 1e-14;

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_entries(2, vec![ZERO, ONE, ONE, ZERO]).expect("2x2")
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_entries(2, vec![ZERO, -I, I, ZERO]).expect("2x2")
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[1.0, -1.0])
}

/// σ = e^{−Σ_j w_j H_j} / tr[…]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QbmModel {
    basis: Vec<ComplexMatrix>,
    pub weights: Vec<f64>,
}

impl QbmModel {
    pub fn new(basis: Vec<ComplexMatrix>, weights: Vec<f64>) -> Result<Self> {
        let dim = basis.first().map(|h| h.dim()).ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
        if dim > MAX_QBM_DIM {
            return Err(Error::InvalidArgument(format!("dimension {dim} exceeds {MAX_QBM_DIM}")));
        }
        if basis.len() != weights.len() {
            return Err(Error::Shape(format!("{} operators but {} weights", basis.len(), weights.len())));
        }
        for (j, h) in basis.iter().enumerate() {
            if h.dim() != dim {
                return Err(Error::Shape(format!("operator {j} is {0}x{0}, expected {dim}x{dim}", h.dim())));
            }
            let defect = h.hermitian_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian(defect));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(QbmModel { basis, weights })
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis[0].dim()
    }

    /// Σ_j w_j H_j
    pub fn hamiltonian(&self) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.dim());
        for (op, &w) in self.basis.iter().zip(&self.weights) {
            for (e, &x) in h.entries_mut().iter_mut().zip(op.entries()) {
                *e += x * w;
            }
        }
        h
    }
}

/// Labels of [`two_qubit_basis`], in order.
pub const TWO_QUBIT_LABELS: [&str; 6] = ["ZI", "IZ", "XI", "IX", "ZZ", "XX"];

/// Six-operator two-qubit basis Z⊗I, I⊗Z, X⊗I, I⊗X, Z⊗Z, X⊗X.
pub fn two_qubit_basis() -> Vec<ComplexMatrix> {
    let (x, z, id) = (pauli_x(), pauli_z(), ComplexMatrix::identity(2));
    vec![z.kron(&id), id.kron(&z), x.kron(&id), id.kron(&x), z.kron(&z), x.kron(&x)]
}

pub fn qbm_state(model: &QbmModel) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(&model.hamiltonian(), EIG_TOL)?;
    let lowest = *eig.values.last().expect("non-empty");
    let z: f64 = eig.values.iter().map(|l| (lowest - l).exp()).sum();
    let mut sigma = eig.reconstruct_with(|l| (lowest - l).exp() / z);
    sigma.hermitize();
    Ok(sigma)
}

fn check_density(rho: &ComplexMatrix, what: &str) -> Result<()> {
    let defect = rho.hermitian_defect();
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    if (rho.trace() - ONE).norm() > 1e-10 {
        return Err(Error::InvalidArgument(format!("{what} does not have unit trace")));
    }
    Ok(())
}

/// S(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ, with 0 ln 0 = 0.
pub fn relative_entropy(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!("ρ is {0}x{0}, σ is {1}x{1}", rho.dim(), sigma.dim())));
    }
    check_density(rho, "ρ")?;
    check_density(sigma, "σ")?;
    let er = hermitian_eig(rho, EIG_TOL)?;
    if *er.values.last().expect("non-empty") < -1e-10 {
        return Err(Error::InvalidArgument("ρ has a negative eigenvalue".into()));
    }
    let es = hermitian_eig(sigma, EIG_TOL)?;
    let min = *es.values.last().expect("non-empty");
    if min < MIN_SIGMA_EIGENVALUE {
        return Err(Error::InvalidArgument(format!("σ eigenvalue {min:e} is below {MIN_SIGMA_EIGENVALUE:e}")));
    }
    let neg_entropy: f64 = er.values.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum();
    let ln_sigma = es.reconstruct_with(f64::ln);
    Ok(neg_entropy - rho.trace_product(&ln_sigma)?.re)
}

/// ∂S(ρ‖σ_w)/∂w_j = tr(ρ H_j) − tr(σ H_j)
pub fn qbm_gradient(model: &QbmModel, rho: &ComplexMatrix) -> Result<Vec<f64>> {
    if rho.dim() != model.dim() {
        return Err(Error::Shape(format!("ρ is {0}x{0}, model is {1}x{1}", rho.dim(), model.dim())));
    }
    check_density(rho, "ρ")?;
    let sigma = qbm_state(model)?;
    model
        .basis
        .iter()
        .map(|h| Ok((rho.trace_product(h)? - sigma.trace_product(h)?).re))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbmReport {
    pub model: QbmModel,
    /// Relative entropy before each step and after the last.
    pub relative_entropy: Vec<f64>,
}

/// Plain gradient descent w ← w − η ∇S.
pub fn train_qbm(model: &QbmModel, rho: &ComplexMatrix, learning_rate: f64, steps: usize) -> Result<QbmReport> {
    let mut model = model.clone();
    let mut history = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        history.push(relative_entropy(rho, &qbm_state(&model)?)?);
        let g = qbm_gradient(&model, rho)?;
        for (w, gj) in model.weights.iter_mut().zip(g) {
            *w -= learning_rate * gj;
        }
    }
    history.push(relative_entropy(rho, &qbm_state(&model)?)?);
    Ok(QbmReport {
        model,
        relative_entropy: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QbmConfig {
    /// Target thermal state weights in the two-qubit basis; drawn from
    /// N(0, target_scale²) when empty.
    pub target_weights: Vec<f64>,
    pub target_scale: f64,
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for QbmConfig {
    fn default() -> Self {
        QbmConfig {
            target_weights: Vec::new(),
            target_scale: 0.7,
            learning_rate: 0.5,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbmTask {
    pub target_weights: Vec<f64>,
    pub target: ComplexMatrix,
    pub report: QbmReport,
}

/// Two-qubit task: learn a thermal target from w = 0. Stream 0 draws the
/// target weights when they are not given.
pub fn qbm_two_qubit_task(config: &QbmConfig, seed: u64) -> Result<QbmTask> {
    let basis = two_qubit_basis();
    let target_w = if config.target_weights.is_empty() {
        let mut rng = RngStream::new(seed, 0);
        (0..basis.len()).map(|_| config.target_scale * rng.gaussian_std()).collect()
    } else {
        config.target_weights.clone()
    };
    let target = qbm_state(&QbmModel::new(basis.clone(), target_w.clone())?)?;
    let start = QbmModel::new(basis.clone(), vec![0.0; basis.len()])?;
    let report = train_qbm(&start, &target, config.learning_rate, config.steps)?;
    Ok(QbmTask {
        target_weights: target_w,
        target,
        report,
    })
}

/// Full-rank random density matrix G G† / tr(G G†) with complex Gaussian G.
pub fn random_density(dim: usize, rng: &mut RngStream) -> ComplexMatrix {
    let entries: Vec<C64> = (0..dim * dim).map(|_| C64::new(rng.gaussian_std(), rng.gaussian_std())).collect();
    let g = ComplexMatrix::from_entries(dim, entries).expect("dim² entries");
    let p = g.matmul(&g.dagger()).expect("same dim");
    let t = p.trace().re;
    let mut rho = p.scale_real(1.0 / t);
    rho.hermitize();
    rho
}
