use crate::error::{Error, Result};
use crate::numkit::{hermitian_eig, ComplexMatrix, C64, ZERO};

/// Density matrix on photon numbers 0..cutoff−1.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    rho: ComplexMatrix,
}

impl FockDensityMatrix {
    /// Checks Hermiticity and unit trace at 1e-10 and positivity at −1e-8.
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        if rho.dim() < 2 {
            return Err(Error::InvalidArgument("cutoff must be at least 2".into()));
        }
        if !rho.is_finite() {
            return Err(Error::InvalidArgument("density matrix has non-finite entries".into()));
        }
        let defect = rho.hermitian_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidArgument(format!("trace {tr} is not 1")));
        }
        let min = *hermitian_eig(&rho, 1e-12)?.values.last().expect("non-empty");
        if min < -1e-8 {
            return Err(Error::InvalidArgument(format!("negative eigenvalue {min:e}")));
        }
        Ok(FockDensityMatrix { rho })
    }

    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff || cutoff < 2 {
            return Err(Error::InvalidArgument(format!("Fock level {n} outside cutoff {cutoff}")));
        }
        Ok(FockDensityMatrix {
            rho: ComplexMatrix::projector(cutoff, n),
        })
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::fock(0, cutoff)
    }

    /// Diagonal mixture with the given populations (normalized here).
    pub fn mixture(populations: &[f64]) -> Result<Self> {
        let total: f64 = populations.iter().sum();
        if populations.len() < 2 || populations.iter().any(|p| !(*p >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidArgument("populations must be non-negative and not all zero".into()));
        }
        let p: Vec<f64> = populations.iter().map(|x| x / total).collect();
        Ok(FockDensityMatrix {
            rho: ComplexMatrix::diagonal(&p),
        })
    }

    /// Coherent state |α⟩ truncated to the cutoff and renormalized.
    pub fn coherent(alpha: C64, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidArgument("cutoff must be at least 2".into()));
        }
        let mut amps = vec![ZERO; cutoff];
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for (n, amp) in amps.iter_mut().enumerate() {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            *amp = c;
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let v: Vec<C64> = amps.iter().map(|z| z / norm.sqrt()).collect();
        Ok(FockDensityMatrix {
            rho: ComplexMatrix::outer(&v),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.rho
    }

    /// Photon-number distribution ρ_nn.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.cutoff()).map(|n| self.rho.get(n, n).re).collect()
    }

    /// Shannon entropy (nats) of the photon-number distribution.
    pub fn number_entropy(&self) -> f64 {
        -self
            .populations()
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// ρ_nn, the overlap with the Fock state |n⟩.
pub fn fock_overlap(state: &FockDensityMatrix, n: usize) -> Result<f64> {
    if n >= state.cutoff() {
        return Err(Error::InvalidArgument(format!("Fock level {n} outside cutoff {}", state.cutoff())));
    }
    Ok(state.matrix().get(n, n).re.clamp(0.0, 1.0))
}
