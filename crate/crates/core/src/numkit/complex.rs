use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        ComplexMatrix { dim, entries }
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} entries do not form a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix { dim, entries })
    }

    /// Real matrix given as rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows do not form a square matrix".into()));
        }
        Ok(Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// |k><k| on a `dim`-dimensional space.
    pub fn projector(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.set(k, k, ONE);
        m
    }

    /// |v><v| for a column vector v.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, k)).collect()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for p in 0..n {
                let a = self.entries[i * n + p];
                if a == ZERO {
                    continue;
                }
                let brow = &other.entries[p * n..(p + 1) * n];
                for (o, &b) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(ComplexMatrix { dim: n, entries: out })
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector of length {} against {}x{} matrix",
                v.len(),
                self.dim,
                self.dim
            )));
        }
        Ok((0..self.dim)
            .map(|i| {
                self.entries[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn dagger(&self) -> ComplexMatrix {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(other)?;
        Ok(ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        self.scale(C64::new(s, 0.0))
    }

    /// [self, other]
    pub fn commutator(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// {self, other}
    pub fn anticommutator(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.matmul(other)?.add(&other.matmul(self)?)
    }

    /// Tensor (Kronecker) product self ⊗ other.
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |i, j| {
            self.get(i / m, j / m) * other.get(i % m, j % m)
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> Result<C64> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut s = ZERO;
        for i in 0..n {
            for k in 0..n {
                s += self.entries[i * n + k] * other.entries[k * n + i];
            }
        }
        Ok(s)
    }

    /// max_ij |m_ij - conj(m_ji)|
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() < tol
    }

    /// Replaces the matrix by (m + m†)/2.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self.get(i, i);
            self.set(i, i, C64::new(d.re, 0.0));
            for j in i + 1..n {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i).conj());
                self.set(i, j, avg);
                self.set(j, i, avg.conj());
            }
        }
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    fn check_dim(&self, other: &ComplexMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "{}x{} against {}x{}",
                self.dim, self.dim, other.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Sparse square matrix stored as its non-zero entries, used for the
/// fixed ladder operators in hot integration loops.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    nonzeros: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let mut nonzeros = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if v != ZERO {
                    nonzeros.push((i, j, v));
                }
            }
        }
        SparseMatrix { dim: n, nonzeros }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.nonzeros.len()
    }

    /// out = self · dense
    pub fn mul_into(&self, dense: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = self.dim;
        debug_assert_eq!(dense.dim(), n);
        debug_assert_eq!(out.dim(), n);
        out.entries.iter_mut().for_each(|e| *e = ZERO);
        for &(i, k, v) in &self.nonzeros {
            let src = &dense.entries[k * n..(k + 1) * n];
            let dst = &mut out.entries[i * n..(i + 1) * n];
            for (o, &b) in dst.iter_mut().zip(src) {
                *o += v * b;
            }
        }
    }

    /// out += scale · self · dense · self†
    pub fn sandwich_add(&self, dense: &ComplexMatrix, scale: f64, out: &mut ComplexMatrix) {
        let n = self.dim;
        for &(i, k, v) in &self.nonzeros {
            for &(j, l, w) in &self.nonzeros {
                out.entries[i * n + j] += v * dense.entries[k * n + l] * w.conj() * scale;
            }
        }
    }

    /// tr(self · dense)
    pub fn trace_product(&self, dense: &ComplexMatrix) -> C64 {
        self.nonzeros
            .iter()
            .map(|&(i, k, v)| v * dense.get(k, i))
            .sum()
    }
}
