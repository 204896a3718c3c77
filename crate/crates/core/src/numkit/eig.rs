//! Cyclic Jacobi diagonalization of Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot element with a
//! diagonal unitary and then applies a real Jacobi rotation, so the
//! eigenvalues come out real and the accumulated transform stays unitary.

use super::complex::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Inputs must satisfy max |m - m†| below this.
pub const HERMITIAN_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition m = V diag(values) V†, values in descending order,
/// eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// V f(Λ) V† for a scalar function of the eigenvalues.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors.get(i, k) * fv[k] * self.vectors.get(j, k).conj())
                .sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|v| v)
    }
}

/// Diagonalizes a Hermitian matrix with cyclic Jacobi sweeps.
///
/// Iteration stops once the off-diagonal Frobenius norm drops below
/// `max(0.1 * tol, eps * ‖m‖_F)`; the budget is 100 sweeps.
pub fn hermitian_eig(m: &ComplexMatrix, tol: f64) -> Result<HermitianEig> {
    let n = m.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigensolver supports 1 <= dim <= {MAX_DIM}, got {n}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let defect = m.hermitian_defect();
    if defect >= HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }

    let mut a = m.clone();
    a.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let threshold = (0.1 * tol).max(f64::EPSILON * a.frobenius());

    let mut converged = off_diagonal_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off_diagonal_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).re.total_cmp(&a.get(i, i).re));
    let values = order.iter().map(|&k| a.get(k, k).re).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v.get(i, order[j]));
    Ok(HermitianEig { values, vectors })
}

/// Eigen-decomposition of a real symmetric matrix given as rows.
pub fn symmetric_eig(rows: &[Vec<f64>], tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = ComplexMatrix::from_real_rows(rows)?;
    let eig = hermitian_eig(&m, tol)?;
    let n = rows.len();
    // For real input every rotation phase is ±1, so the vectors are real.
    let vectors = (0..n)
        .map(|k| (0..n).map(|i| eig.vectors.get(i, k).re).collect())
        .collect();
    Ok((eig.values, vectors))
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j).norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let g = a.get(p, q);
    let h = g.norm();
    if h < f64::MIN_POSITIVE {
        return;
    }
    let n = a.dim();
    let phase = g / h;
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let zeta = (aqq - app) / (2.0 * h);
    let t = if zeta == 0.0 {
        1.0
    } else {
        zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let e_minus = phase.conj();

    // A <- A J, V <- V J
    for k in 0..n {
        for mat in [&mut *a, &mut *v] {
            let kp = mat.get(k, p);
            let kq = mat.get(k, q);
            mat.set(k, p, kp * c - kq * e_minus * s);
            mat.set(k, q, kp * s + kq * e_minus * c);
        }
    }
    // A <- J† A
    for k in 0..n {
        let pk = a.get(p, k);
        let qk = a.get(q, k);
        a.set(p, k, pk * c - qk * phase * s);
        a.set(q, k, pk * s + qk * phase * c);
    }
    a.set(p, q, ZERO);
    a.set(q, p, ZERO);
    let dp = a.get(p, p).re;
    let dq = a.get(q, q).re;
    a.set(p, p, C64::new(dp, 0.0));
    a.set(q, q, C64::new(dq, 0.0));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    fn random_hermitian(rng: &mut RngStream, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::from_fn(n, |_, _| ZERO);
        for i in 0..n {
            m.set(i, i, C64::new(rng.gaussian_std(), 0.0));
            for j in i + 1..n {
                let z = C64::new(rng.gaussian_std(), rng.gaussian_std());
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    fn residual(m: &ComplexMatrix, eig: &HermitianEig) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..m.dim() {
            let vk = eig.vector(k);
            let mv = m.apply(&vk).unwrap();
            for (x, y) in mv.iter().zip(&vk) {
                worst = worst.max((x - y * eig.values[k]).norm());
            }
        }
        worst
    }

    fn gram_defect(v: &ComplexMatrix) -> f64 {
        v.dagger()
            .matmul(v)
            .unwrap()
            .max_abs_diff(&ComplexMatrix::identity(v.dim()))
    }

    #[test]
    fn diagonal_input() {
        let eig = hermitian_eig(&ComplexMatrix::diagonal(&[3.0, 1.0, 2.0]), 1e-12).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        let expected_axis = [0, 2, 1];
        for (k, &axis) in expected_axis.iter().enumerate() {
            assert!((eig.vectors.get(axis, k).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = hermitian_eig(&x, 1e-12).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        assert!(residual(&x, &eig) < 1e-12);
    }

    #[test]
    fn pauli_y_has_complex_eigenvectors() {
        let y = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => ZERO,
        });
        let eig = hermitian_eig(&y, 1e-12).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!(residual(&y, &eig) < 1e-12);
    }

    #[test]
    fn random_reconstruction_and_invariants() {
        let mut rng = RngStream::new(3, 7);
        for n in [1, 2, 5, 8, 16] {
            let m = random_hermitian(&mut rng, n);
            let eig = hermitian_eig(&m, 1e-10).unwrap();
            assert!(eig.reconstruct().max_abs_diff(&m) < 1e-9);
            assert!(residual(&m, &eig) < 1e-9);
            assert!(gram_defect(&eig.vectors) < 1e-9);
            let sum: f64 = eig.values.iter().sum();
            assert!((sum - m.trace().re).abs() < 1e-10);
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn largest_supported_dimension() {
        let mut rng = RngStream::new(4, 0);
        let m = random_hermitian(&mut rng, MAX_DIM);
        let eig = hermitian_eig(&m, 1e-9).unwrap();
        assert!(residual(&m, &eig) < 1e-9);
    }

    #[test]
    fn degenerate_spectrum() {
        let eig = hermitian_eig(&ComplexMatrix::identity(4), 1e-12).unwrap();
        assert!(eig.values.iter().all(|&v| v == 1.0));
        assert!(gram_defect(&eig.vectors) < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(hermitian_eig(&m, 1e-12), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn oversized_rejected() {
        let m = ComplexMatrix::identity(MAX_DIM + 1);
        assert!(matches!(hermitian_eig(&m, 1e-12), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn symmetric_helper_returns_real_vectors() {
        let rows = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = symmetric_eig(&rows, 1e-12).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0][0].abs() - s).abs() < 1e-14);
        assert!((vecs[0][0] - vecs[0][1]).abs() < 1e-14);
    }
}
