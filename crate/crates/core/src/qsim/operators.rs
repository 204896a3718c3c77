use crate::error::{Error, Result};
use crate::numkit::{ComplexMatrix, C64, I, ZERO};

/// Lowering operator on photon numbers 0..cutoff−1: â|n⟩ = √n |n−1⟩.
pub fn annihilation(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be at least 2")));
    }
    Ok(ComplexMatrix::from_fn(cutoff, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    }))
}

/// â†â
pub fn number_operator(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be at least 2")));
    }
    Ok(ComplexMatrix::diagonal(&(0..cutoff).map(|n| n as f64).collect::<Vec<_>>()))
}

/// Ĥ = i√κ(α â† − α* â)
pub fn drive_hamiltonian(alpha: C64, kappa: f64, cutoff: usize) -> Result<ComplexMatrix> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("decay rate {kappa} must be non-negative")));
    }
    let a = annihilation(cutoff)?;
    let term = a.dagger().scale(alpha).sub(&a.scale(alpha.conj()))?;
    Ok(term.scale(I * kappa.sqrt()))
}

/// rate · (R ρ R† − ½{R†R, ρ})
pub fn lindblad_dissipator(rho: &ComplexMatrix, r: &ComplexMatrix, rate: f64) -> Result<ComplexMatrix> {
    if rho.dim() != r.dim() {
        return Err(Error::Shape(format!("ρ is {0}x{0}, R is {1}x{1}", rho.dim(), r.dim())));
    }
    let rd = r.dagger();
    let jump = r.matmul(rho)?.matmul(&rd)?;
    let rdr = rd.matmul(r)?;
    let anti = rdr.anticommutator(rho)?;
    Ok(jump.sub(&anti.scale_real(0.5))?.scale_real(rate))
}

/// tr(ρ · op)
pub fn expectation(rho: &ComplexMatrix, op: &ComplexMatrix) -> Result<C64> {
    rho.trace_product(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    fn basis(n: usize, k: usize) -> Vec<C64> {
        (0..n).map(|i| if i == k { C64::new(1.0, 0.0) } else { ZERO }).collect()
    }

    fn random_matrix(n: usize, rng: &mut RngStream) -> ComplexMatrix {
        let entries = (0..n * n).map(|_| C64::new(rng.gaussian_std(), rng.gaussian_std())).collect();
        ComplexMatrix::from_entries(n, entries).unwrap()
    }

    fn random_density(n: usize, rng: &mut RngStream) -> ComplexMatrix {
        let m = random_matrix(n, rng);
        let p = m.matmul(&m.dagger()).unwrap();
        let t = p.trace().re;
        p.scale_real(1.0 / t)
    }

    #[test]
    fn lowering_examples() {
        let a = annihilation(5).unwrap();
        assert_eq!(a.apply(&basis(5, 1)).unwrap(), basis(5, 0));
        assert!(a.apply(&basis(5, 0)).unwrap().iter().all(|z| *z == ZERO));
        assert!(annihilation(1).is_err());
    }

    #[test]
    fn commutator_is_identity_below_edge() {
        let n = 6;
        let a = annihilation(n).unwrap();
        let c = a.commutator(&a.dagger()).unwrap();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((c.get(i, j) - C64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
        // truncation shows up in the top corner
        assert!((c.get(n - 1, n - 1).re - (1.0 - n as f64)).abs() < 1e-14);
    }

    #[test]
    fn drive_hamiltonian_examples() {
        assert_eq!(drive_hamiltonian(ZERO, 1.0, 4).unwrap(), ComplexMatrix::zeros(4));
        let alpha = C64::new(0.3, -0.7);
        let kappa = 2.0;
        let h = drive_hamiltonian(alpha, kappa, 4).unwrap();
        assert!(h.hermitian_defect() < 1e-15);
        let expected = I * kappa.sqrt() * alpha.conj() * -1.0;
        assert!((h.get(0, 1) - expected).norm() < 1e-15);
        // e^{−iHδt}|0⟩ ≈ |0⟩ − iδt H|0⟩, so ⟨1|ψ⟩/δt → −i H_10 = √κ α
        let dt = 1e-6;
        let psi: Vec<C64> = h
            .apply(&basis(4, 0))
            .unwrap()
            .iter()
            .zip(basis(4, 0))
            .map(|(hv, b)| b - I * dt * hv)
            .collect();
        assert!((psi[1] / dt - alpha * kappa.sqrt()).norm() < 1e-9);
    }

    #[test]
    fn dissipator_examples() {
        let a = annihilation(4).unwrap();
        let vac = ComplexMatrix::projector(4, 0);
        assert!(lindblad_dissipator(&vac, &a, 1.0).unwrap().frobenius() < 1e-15);
        let kappa = 0.7;
        let one = ComplexMatrix::projector(4, 1);
        let d = lindblad_dissipator(&one, &a, kappa).unwrap();
        let dn = expectation(&d, &number_operator(4).unwrap()).unwrap();
        assert!((dn.re + kappa).abs() < 1e-14);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            let rho = random_density(5, &mut rng);
            let r = random_matrix(5, &mut rng);
            assert!(lindblad_dissipator(&rho, &r, 1.3).unwrap().trace().norm() < 1e-12);
        }
        assert!(lindblad_dissipator(&vac, &annihilation(3).unwrap(), 1.0).is_err());
    }

    #[test]
    fn expectation_examples() {
        let n = number_operator(6).unwrap();
        for k in 0..6 {
            let e = expectation(&ComplexMatrix::projector(6, k), &n).unwrap();
            assert_eq!(e, C64::new(k as f64, 0.0));
        }
        let mut rng = RngStream::new(2, 0);
        let rho = random_density(4, &mut rng);
        assert!((expectation(&rho, &ComplexMatrix::identity(4)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let (x, y) = (random_matrix(4, &mut rng), random_matrix(4, &mut rng));
        let c = C64::new(0.4, -1.1);
        let lhs = expectation(&rho, &x.add(&y.scale(c)).unwrap()).unwrap();
        let rhs = expectation(&rho, &x).unwrap() + c * expectation(&rho, &y).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
