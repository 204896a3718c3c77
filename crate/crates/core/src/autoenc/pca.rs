use crate::error::{Error, Result};
use crate::numkit::{symmetric_eig, Tensor};

/// Means below this count as already centered.
pub const CENTERED_TOL: f64 = 1e-8;

/// ρ_lj = ⟨x_l x_j⟩ over a batch, stored as a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    rows: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("correlation matrix must be square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (rows[i][j] - rows[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("correlation matrix is not symmetric".into()));
                }
            }
        }
        Ok(CorrelationMatrix { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rows[i][i]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub matrix: CorrelationMatrix,
    /// True when the data had to be mean-subtracted first.
    pub centered_here: bool,
}

/// Batch average of x xᵀ. Uncentered data is centered first and the fact
/// is recorded in the result.
pub fn correlation_matrix(data: &Tensor) -> Result<CorrelationEstimate> {
    if data.ndim() != 2 {
        return Err(Error::Shape("data must be [batch, features]".into()));
    }
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| data.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let centered_here = mean.iter().any(|m| m.abs() >= CENTERED_TOL);
    let mut rows = vec![vec![0.0; d]; d];
    for s in 0..n {
        let x: Vec<f64> = if centered_here {
            data.row(s).iter().zip(&mean).map(|(v, m)| v - m).collect()
        } else {
            data.row(s).to_vec()
        };
        for l in 0..d {
            for j in l..d {
                rows[l][j] += x[l] * x[j];
            }
        }
    }
    for l in 0..d {
        for j in l..d {
            rows[l][j] /= n as f64;
            rows[j][l] = rows[l][j];
        }
    }
    Ok(CorrelationEstimate {
        matrix: CorrelationMatrix { rows },
        centered_here,
    })
}

/// Eigen-decomposition of ρ together with a chosen bottleneck size.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// eigenvectors[k] is the k-th orthonormal eigenvector.
    pub eigenvectors: Vec<Vec<f64>>,
    pub m_hidden: usize,
}

pub fn pca(rho: &CorrelationMatrix, m_hidden: usize) -> Result<PcaResult> {
    let (eigenvalues, eigenvectors) = symmetric_eig(rho.rows(), 1e-12)?;
    let min = eigenvalues.last().copied().unwrap_or(0.0);
    if min < -1e-10 {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    Ok(PcaResult {
        eigenvalues,
        eigenvectors,
        m_hidden,
    })
}

impl PcaResult {
    /// Top-`m_hidden` eigenvectors.
    pub fn top_subspace(&self) -> &[Vec<f64>] {
        &self.eigenvectors[..self.m_hidden.min(self.eigenvectors.len())]
    }
}

/// Smallest attainable linear-autoencoder cost: the eigenvalues left out by
/// projecting on the top `m_hidden` eigenvectors.
pub fn pca_optimal_cost(pca: &PcaResult) -> Result<f64> {
    let dim = pca.eigenvalues.len();
    if pca.m_hidden > dim {
        return Err(Error::InvalidArgument(format!(
            "bottleneck {} exceeds dimension {dim}",
            pca.m_hidden
        )));
    }
    Ok(pca.eigenvalues[pca.m_hidden..].iter().sum())
}

/// Principal angles (radians, ascending) between the column spans of two
/// sets of vectors of equal dimension. Each set must be linearly independent.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    let k = qa.len().min(qb.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    // C = Qaᵀ Qb; singular values of C are the cosines.
    let c: Vec<Vec<f64>> = qa
        .iter()
        .map(|u| qb.iter().map(|v| dot(u, v)).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..qb.len())
        .map(|i| (0..qb.len()).map(|j| (0..qa.len()).map(|r| c[r][i] * c[r][j]).sum()).collect())
        .collect();
    let (vals, _) = symmetric_eig(&gram, 1e-14)?;
    let mut angles: Vec<f64> = vals[..k]
        .iter()
        .map(|&s2| s2.max(0.0).sqrt().min(1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Singular values (descending) of a square or rectangular matrix given as rows.
pub fn singular_values(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    let gram: Vec<Vec<f64>> = (0..cols)
        .map(|i| (0..cols).map(|j| rows.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let (vals, _) = symmetric_eig(&gram, 1e-14)?;
    Ok(vals.iter().map(|v| v.max(0.0).sqrt()).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt.
fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let p = dot(&w, q);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= p * qi;
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument("vectors are linearly dependent".into()));
        }
        out.push(w.into_iter().map(|x| x / norm).collect());
    }
    Ok(out)
}
