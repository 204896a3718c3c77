use serde::{Deserialize, Serialize};

use super::operators::{annihilation, number_operator};
use super::state::FockDensityMatrix;
use crate::error::{Error, Result};
use crate::numkit::{ComplexMatrix, RngStream, SparseMatrix, C64};

/// Inner steps must satisfy (κ + 4κ′‖Â‖²) δt below this.
pub const STABILITY_LIMIT: f64 = 0.1;
/// Top-level population that counts as cutoff leakage.
pub const LEAKAGE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    /// Â = â
    Homodyne,
    /// Â = â†â
    Qnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmeConfig {
    /// Cavity decay rate κ.
    pub kappa: f64,
    /// Measurement rate κ′.
    pub kappa_meas: f64,
    /// RL time step Δt.
    pub dt: f64,
    pub substeps: usize,
    pub measurement: MeasurementKind,
}

impl SmeConfig {
    pub fn inner_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    /// Operator norm of Â on the truncated space.
    pub fn measurement_norm(&self, cutoff: usize) -> f64 {
        let top = cutoff.saturating_sub(1) as f64;
        match self.measurement {
            MeasurementKind::Homodyne => top.sqrt(),
            MeasurementKind::Qnd => top,
        }
    }

    /// (κ + 4κ′‖Â‖²) δt
    pub fn stability_number(&self, cutoff: usize) -> f64 {
        let norm = self.measurement_norm(cutoff);
        (self.kappa + 4.0 * self.kappa_meas * norm * norm) * self.inner_dt()
    }

    /// Smallest substep count meeting the stability bound for `cutoff`.
    pub fn min_substeps(&self, cutoff: usize) -> usize {
        let norm = self.measurement_norm(cutoff);
        let rate = self.kappa + 4.0 * self.kappa_meas * norm * norm;
        ((rate * self.dt / STABILITY_LIMIT).floor() as usize + 1).max(1)
    }

    pub fn validate(&self, cutoff: usize) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa_meas >= 0.0) || !self.kappa.is_finite() || !self.kappa_meas.is_finite() {
            return Err(Error::InvalidArgument("rates κ and κ′ must be finite and non-negative".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {} must be positive", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        if cutoff < 2 {
            return Err(Error::InvalidArgument("cutoff must be at least 2".into()));
        }
        let s = self.stability_number(cutoff);
        if s >= STABILITY_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "(κ + 4κ′‖A‖²)δt = {s:.4} violates the stability bound {STABILITY_LIMIT}; use at least {} substeps",
                self.min_substeps(cutoff)
            )));
        }
        Ok(())
    }
}

/// Euler–Maruyama integrator for one trajectory, with preallocated buffers.
#[derive(Debug, Clone)]
pub struct SmeIntegrator {
    config: SmeConfig,
    cutoff: usize,
    a: SparseMatrix,
    a_dense: ComplexMatrix,
    meas: SparseMatrix,
    /// −½κ a†a − ½κ′ A†A
    k_static: ComplexMatrix,
    k_buf: ComplexMatrix,
    prod: ComplexMatrix,
    next: ComplexMatrix,
    /// Inner steps whose top Fock population exceeded [`LEAKAGE_THRESHOLD`].
    pub leakage_warnings: u64,
}

impl SmeIntegrator {
    pub fn new(config: &SmeConfig, cutoff: usize) -> Result<Self> {
        config.validate(cutoff)?;
        let a = annihilation(cutoff)?;
        let meas = match config.measurement {
            MeasurementKind::Homodyne => a.clone(),
            MeasurementKind::Qnd => number_operator(cutoff)?,
        };
        let n = number_operator(cutoff)?;
        let mdm = meas.dagger().matmul(&meas)?;
        let k_static = n.scale_real(-0.5 * config.kappa).sub(&mdm.scale_real(0.5 * config.kappa_meas))?;
        Ok(SmeIntegrator {
            config: config.clone(),
            cutoff,
            a: SparseMatrix::from_dense(&a),
            a_dense: a,
            meas: SparseMatrix::from_dense(&meas),
            k_static,
            k_buf: ComplexMatrix::zeros(cutoff),
            prod: ComplexMatrix::zeros(cutoff),
            next: ComplexMatrix::zeros(cutoff),
            leakage_warnings: 0,
        })
    }

    pub fn config(&self) -> &SmeConfig {
        &self.config
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Advances one RL step Δt under constant drive α, appending one signal
    /// value per inner step. With `stochastic` false the noise term and ΔW
    /// are dropped, giving the deterministic Lindblad evolution.
    pub fn step(
        &mut self,
        state: &mut FockDensityMatrix,
        alpha: C64,
        rng: &mut RngStream,
        stochastic: bool,
        signal: &mut Vec<f64>,
    ) -> Result<()> {
        if state.cutoff() != self.cutoff {
            return Err(Error::Shape(format!(
                "state cutoff {} differs from integrator cutoff {}",
                state.cutoff(),
                self.cutoff
            )));
        }
        // K = −iH + k_static, with −iH = √κ(α a† − α* a)
        let sk = self.config.kappa.sqrt();
        let kappa_drive = ComplexMatrix::from_fn(self.cutoff, |i, j| {
            let mut v = self.k_static.get(i, j);
            if i == j + 1 {
                v += alpha * sk * self.a_dense.get(j, i).conj();
            } else if j == i + 1 {
                v -= alpha.conj() * sk * self.a_dense.get(i, j);
            }
            v
        });
        if self.config.measurement == MeasurementKind::Qnd {
            if alpha.im == 0.0 && state.matrix().entries().iter().all(|z| z.im == 0.0) {
                return self.step_qnd_real(state, alpha.re, rng, stochastic, signal);
            }
            return self.step_qnd(state, alpha, rng, stochastic, signal);
        }
        let k = SparseMatrix::from_dense(&kappa_drive);
        let dt = self.config.inner_dt();
        let sqrt_dt = dt.sqrt();
        let sqrt_km = self.config.kappa_meas.sqrt();
        let n = self.cutoff;
        for _ in 0..self.config.substeps {
            let rho = state.matrix_mut();
            // ⟨A + A†⟩ = 2 Re tr(Aρ) for Hermitian ρ
            let e = 2.0 * self.meas.trace_product(rho).re;
            let dw = if stochastic { sqrt_dt * rng.gaussian_std() } else { 0.0 };

            k.mul_into(rho, &mut self.k_buf);
            self.next.entries_mut().iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            self.a.sandwich_add(rho, self.config.kappa, &mut self.next);
            self.meas.sandwich_add(rho, self.config.kappa_meas, &mut self.next);
            if dw != 0.0 {
                self.meas.mul_into(rho, &mut self.prod);
            }
            let kb = self.k_buf.entries();
            let ab = self.prod.entries();
            let r = rho.entries();
            let out = self.next.entries_mut();
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    let ji = j * n + i;
                    // Kρ + ρK† = Kρ + (Kρ)†
                    let drift = out[ij] + kb[ij] + kb[ji].conj();
                    let mut v = r[ij] + drift * dt;
                    if dw != 0.0 {
                        let back = ab[ij] + ab[ji].conj() - r[ij] * e;
                        v += back * (dw * sqrt_km);
                    }
                    out[ij] = v;
                }
            }
            std::mem::swap(rho, &mut self.next);
            rho.hermitize();
            let tr = rho.trace().re;
            if !(tr >= 0.5) || !rho.is_finite() {
                return Err(Error::IntegrationBlowUp { trace: tr });
            }
            let inv = 1.0 / tr;
            rho.entries_mut().iter_mut().for_each(|z| *z *= inv);
            if rho.get(n - 1, n - 1).re > LEAKAGE_THRESHOLD {
                self.leakage_warnings += 1;
            }
            signal.push(sqrt_km * e + dw / dt);
        }
        Ok(())
    }
}

impl SmeIntegrator {
    /// Same update as the generic loop, specialized to Â = n̂: the generator
    /// is tridiagonal and the measurement diagonal, so each entry of the
    /// upper triangle depends on at most six neighbours.
    fn step_qnd(
        &mut self,
        state: &mut FockDensityMatrix,
        alpha: C64,
        rng: &mut RngStream,
        stochastic: bool,
        signal: &mut Vec<f64>,
    ) -> Result<()> {
        let n = self.cutoff;
        let kappa = self.config.kappa;
        let km = self.config.kappa_meas;
        let sk = kappa.sqrt();
        let sqrt_km = km.sqrt();
        let dt = self.config.inner_dt();
        let sqrt_dt = dt.sqrt();
        let sq: Vec<f64> = (0..=n).map(|i| (i as f64).sqrt()).collect();
        // K_{i,i−1} = √κ α √i,  K_{i,i+1} = −√κ α* √(i+1)
        let lower: Vec<C64> = (0..n).map(|i| alpha * sk * sq[i]).collect();
        let upper: Vec<C64> = (0..n).map(|i| -alpha.conj() * sk * sq[i + 1]).collect();
        let jump: Vec<f64> = (0..n).map(|i| kappa * sq[i + 1]).collect();
        for _ in 0..self.config.substeps {
            let r = state.matrix_mut();
            let e = 2.0 * (0..n).map(|i| i as f64 * r.get(i, i).re).sum::<f64>();
            let dw = if stochastic { sqrt_dt * rng.gaussian_std() } else { 0.0 };
            let noise = dw * sqrt_km;
            let src = r.entries();
            let out = self.next.entries_mut();
            for i in 0..n {
                for j in i..n {
                    let ij = i * n + j;
                    let (fi, fj) = (i as f64, j as f64);
                    let mut drift = src[ij] * (-0.5 * kappa * (fi + fj) - 0.5 * km * (fi - fj) * (fi - fj));
                    if i > 0 {
                        drift += lower[i] * src[ij - n];
                    }
                    if j > 0 {
                        drift += lower[j].conj() * src[ij - 1];
                    }
                    if i + 1 < n {
                        drift += upper[i] * src[ij + n];
                    }
                    if j + 1 < n {
                        drift += upper[j].conj() * src[ij + 1];
                        if i + 1 < n {
                            drift += src[ij + n + 1] * (jump[i] * sq[j + 1]);
                        }
                    }
                    let v = src[ij] + drift * dt + src[ij] * ((fi + fj - e) * noise);
                    out[ij] = v;
                }
            }
            for i in 0..n {
                let d = out[i * n + i].re;
                out[i * n + i] = C64::new(d, 0.0);
                for j in i + 1..n {
                    out[j * n + i] = out[i * n + j].conj();
                }
            }
            std::mem::swap(r, &mut self.next);
            let tr = r.trace().re;
            if !(tr >= 0.5) || !r.is_finite() {
                return Err(Error::IntegrationBlowUp { trace: tr });
            }
            let inv = 1.0 / tr;
            r.entries_mut().iter_mut().for_each(|z| *z *= inv);
            if r.get(n - 1, n - 1).re > LEAKAGE_THRESHOLD {
                self.leakage_warnings += 1;
            }
            signal.push(sqrt_km * e + dw / dt);
        }
        Ok(())
    }

    /// [`Self::step_qnd`] for a real drive acting on a real density matrix,
    /// which the update keeps real.
    fn step_qnd_real(
        &mut self,
        state: &mut FockDensityMatrix,
        alpha: f64,
        rng: &mut RngStream,
        stochastic: bool,
        signal: &mut Vec<f64>,
    ) -> Result<()> {
        let n = self.cutoff;
        let kappa = self.config.kappa;
        let km = self.config.kappa_meas;
        let sk = kappa.sqrt();
        let sqrt_km = km.sqrt();
        let dt = self.config.inner_dt();
        let sqrt_dt = dt.sqrt();
        // ρ is stored with a one-entry zero border (stride m = n + 2) so the
        // neighbour terms need no boundary tests.
        let m = n + 2;
        let sq = |i: usize| (i as f64).sqrt();
        let lower: Vec<f64> = (0..n).map(|i| alpha * sk * sq(i)).collect();
        let upper: Vec<f64> = (0..n).map(|i| -alpha * sk * sq(i + 1)).collect();
        let mut decay = vec![0.0; n * n];
        let mut jump = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (fi, fj) = (i as f64, j as f64);
                decay[i * n + j] = -0.5 * kappa * (fi + fj) - 0.5 * km * (fi - fj) * (fi - fj);
                jump[i * n + j] = if i + 1 < n && j + 1 < n { kappa * sq(i + 1) * sq(j + 1) } else { 0.0 };
            }
        }
        let mut src = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                src[(i + 1) * m + j + 1] = state.matrix().get(i, j).re;
            }
        }
        let mut out = vec![0.0; n * n];
        for _ in 0..self.config.substeps {
            let e = 2.0 * (0..n).map(|i| i as f64 * src[(i + 1) * m + i + 1]).sum::<f64>();
            let dw = if stochastic { sqrt_dt * rng.gaussian_std() } else { 0.0 };
            let noise = dw * sqrt_km;
            for i in 0..n {
                let (li, ui) = (lower[i], upper[i]);
                let up = &src[i * m + 1..i * m + 1 + n];
                let left = &src[(i + 1) * m..(i + 1) * m + n];
                let mid = &src[(i + 1) * m + 1..(i + 1) * m + 1 + n];
                let right = &src[(i + 1) * m + 2..(i + 1) * m + 2 + n];
                let down = &src[(i + 2) * m + 1..(i + 2) * m + 1 + n];
                let diag = &src[(i + 2) * m + 2..(i + 2) * m + 2 + n];
                let dec = &decay[i * n..i * n + n];
                let jmp = &jump[i * n..i * n + n];
                let row = &mut out[i * n..i * n + n];
                let (lo, hi) = (&lower[..n], &upper[..n]);
                let shift = i as f64 - e;
                for j in 0..n {
                    let c = mid[j];
                    let drift = c * dec[j]
                        + li * up[j]
                        + ui * down[j]
                        + lo[j] * left[j]
                        + hi[j] * right[j]
                        + jmp[j] * diag[j];
                    row[j] = c + drift * dt + c * ((shift + j as f64) * noise);
                }
            }
            let mut tr = 0.0;
            for i in 0..n {
                tr += out[i * n + i];
            }
            // a non-finite entry reaches the trace within a few steps
            if !(tr >= 0.5) || !tr.is_finite() {
                return Err(Error::IntegrationBlowUp { trace: tr });
            }
            let inv = 1.0 / tr;
            for i in 0..n {
                for j in i..n {
                    // exact symmetry: copy the upper triangle
                    let v = out[i * n + j] * inv;
                    src[(i + 1) * m + j + 1] = v;
                    src[(j + 1) * m + i + 1] = v;
                }
            }
            if src[n * m + n] > LEAKAGE_THRESHOLD {
                self.leakage_warnings += 1;
            }
            signal.push(sqrt_km * e + dw / dt);
        }
        if src.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowUp { trace: f64::NAN });
        }
        for i in 0..n {
            for j in 0..n {
                state.matrix_mut().set(i, j, C64::new(src[(i + 1) * m + j + 1], 0.0));
            }
        }
        Ok(())
    }

    /// The generic sparse update, regardless of measurement kind.
    #[cfg(test)]
    fn step_generic(
        &mut self,
        state: &mut FockDensityMatrix,
        alpha: C64,
        rng: &mut RngStream,
        stochastic: bool,
        signal: &mut Vec<f64>,
    ) -> Result<()> {
        let kind = self.config.measurement;
        self.config.measurement = MeasurementKind::Homodyne;
        let out = self.step(state, alpha, rng, stochastic, signal);
        self.config.measurement = kind;
        out
    }
}

/// Advances `state` by one RL step, returning the new state and the
/// per-inner-step signal.
pub fn sme_step(
    state: &FockDensityMatrix,
    config: &SmeConfig,
    alpha: C64,
    rng: &mut RngStream,
) -> Result<(FockDensityMatrix, Vec<f64>)> {
    let mut integ = SmeIntegrator::new(config, state.cutoff())?;
    let mut next = state.clone();
    let mut signal = Vec::with_capacity(config.substeps);
    integ.step(&mut next, alpha, rng, true, &mut signal)?;
    Ok((next, signal))
}

/// Declared first-order Euler tolerance for the analytic cavity oracles:
/// 2(δt κ) max(1, κt) |exact|.
pub fn euler_bound(inner_dt: f64, kappa: f64, t: f64, exact: f64) -> f64 {
    2.0 * inner_dt * kappa * (kappa * t).max(1.0) * exact.abs()
}

/// `trajectory_id,inner_step,time,X,P0..P{N−1}`
pub fn trajectory_csv_header(cutoff: usize) -> String {
    let mut cols = vec!["trajectory_id".to_string(), "inner_step".into(), "time".into(), "X".into()];
    cols.extend((0..cutoff).map(|n| format!("P{n}")));
    cols.join(",")
}

pub fn trajectory_csv_row(trajectory_id: usize, inner_step: usize, time: f64, x: f64, state: &FockDensityMatrix) -> String {
    let mut cols = vec![trajectory_id.to_string(), inner_step.to_string(), time.to_string(), x.to_string()];
    cols.extend(state.populations().iter().map(f64::to_string));
    cols.join(",")
}

/// Integrates one trajectory for `steps` RL steps at constant drive and
/// renders it in the dump format.
pub fn dump_trajectory(
    config: &SmeConfig,
    initial: &FockDensityMatrix,
    alpha: C64,
    steps: usize,
    trajectory_id: usize,
    rng: &mut RngStream,
) -> Result<String> {
    config.validate(initial.cutoff())?;
    let mut state = initial.clone();
    let mut out = trajectory_csv_header(initial.cutoff());
    out.push('\n');
    let dt = config.inner_dt();
    let mut inner = 0;
    // one inner step per call so every row sees its own state
    let single = SmeConfig { substeps: 1, dt, ..config.clone() };
    let mut integ = SmeIntegrator::new(&single, initial.cutoff())?;
    let mut signal = Vec::with_capacity(1);
    for _ in 0..steps * config.substeps {
        signal.clear();
        integ.step(&mut state, alpha, rng, true, &mut signal)?;
        inner += 1;
        out.push_str(&trajectory_csv_row(trajectory_id, inner, inner as f64 * dt, signal[0], &state));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::fock_overlap;

    #[test]
    fn qnd_fast_path_matches_generic_update() {
        let c = cfg(1.0, 0.5, 0.2, 200, MeasurementKind::Qnd);
        let start = FockDensityMatrix::coherent(C64::new(0.6, -0.3), 8).unwrap();
        for (alpha, stochastic) in [(C64::new(0.7, 0.2), true), (C64::new(-1.5, 0.0), false)] {
            let mut fast = SmeIntegrator::new(&c, 8).unwrap();
            let mut slow = fast.clone();
            let (mut s1, mut s2) = (start.clone(), start.clone());
            let (mut x1, mut x2) = (Vec::new(), Vec::new());
            let (mut r1, mut r2) = (RngStream::new(4, 1), RngStream::new(4, 1));
            for _ in 0..5 {
                fast.step(&mut s1, alpha, &mut r1, stochastic, &mut x1).unwrap();
                slow.step_generic(&mut s2, alpha, &mut r2, stochastic, &mut x2).unwrap();
            }
            assert!(s1.matrix().max_abs_diff(s2.matrix()) < 1e-12);
            let mut complex_path = SmeIntegrator::new(&c, 8).unwrap();
            let real_start = FockDensityMatrix::coherent(C64::new(0.6, 0.0), 8).unwrap();
            let (mut s3, mut s4) = (real_start.clone(), real_start);
            let (mut r3, mut r4) = (RngStream::new(5, 2), RngStream::new(5, 2));
            for _ in 0..5 {
                fast.step(&mut s3, C64::new(alpha.re, 0.0), &mut r3, stochastic, &mut x1).unwrap();
                complex_path.step_qnd(&mut s4, C64::new(alpha.re, 0.0), &mut r4, stochastic, &mut x2).unwrap();
            }
            assert!(s3.matrix().max_abs_diff(s4.matrix()) < 1e-12);
            let dx = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dx < 1e-9);
        }
    }

    fn cfg(kappa: f64, kappa_meas: f64, dt: f64, substeps: usize, measurement: MeasurementKind) -> SmeConfig {
        SmeConfig {
            kappa,
            kappa_meas,
            dt,
            substeps,
            measurement,
        }
    }

    #[test]
    fn stability_bound_enforced() {
        let c = cfg(1.0, 0.5, 0.2, 20, MeasurementKind::Qnd);
        assert!(c.validate(8).is_err());
        assert_eq!(c.min_substeps(8), 199);
        let ok = SmeConfig { substeps: 200, ..c };
        assert!(ok.validate(8).is_ok());
        assert!(cfg(-1.0, 0.0, 0.1, 10, MeasurementKind::Qnd).validate(4).is_err());
        assert!(cfg(1.0, 0.0, 0.0, 10, MeasurementKind::Qnd).validate(4).is_err());
    }

    #[test]
    fn free_evolution_leaves_state_and_emits_white_noise() {
        let c = cfg(0.0, 0.0, 0.1, 100, MeasurementKind::Homodyne);
        let state = FockDensityMatrix::coherent(C64::new(0.5, 0.2), 6).unwrap();
        let mut rng = RngStream::new(1, 0);
        let mut integ = SmeIntegrator::new(&c, 6).unwrap();
        let mut s = state.clone();
        let mut signal = Vec::new();
        for _ in 0..200 {
            integ.step(&mut s, C64::new(0.0, 0.0), &mut rng, true, &mut signal).unwrap();
        }
        assert!(s.matrix().max_abs_diff(state.matrix()) < 1e-12);
        let n = signal.len() as f64;
        let mean = signal.iter().sum::<f64>() / n;
        let var = signal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let dt = c.inner_dt();
        // sample variance of 20000 Gaussians: relative SE ≈ 1%
        assert!((var * dt - 1.0).abs() < 0.05, "{}", var * dt);
    }

    #[test]
    fn decay_law_within_euler_bound() {
        let kappa = 1.0;
        let c = cfg(kappa, 0.0, 0.1, 10, MeasurementKind::Homodyne);
        let mut s = FockDensityMatrix::fock(1, 4).unwrap();
        let mut integ = SmeIntegrator::new(&c, 4).unwrap();
        let mut rng = RngStream::new(0, 0);
        let mut signal = Vec::new();
        let dt = c.inner_dt();
        for step in 1..=50 {
            integ.step(&mut s, C64::new(0.0, 0.0), &mut rng, true, &mut signal).unwrap();
            let t = step as f64 * c.dt;
            let exact = (-kappa * t).exp();
            let bound = euler_bound(dt, kappa, t, exact);
            assert!((s.mean_photon_number() - exact).abs() <= bound, "t={t}");
            assert_eq!(s.matrix().hermitian_defect(), 0.0);
            assert!((s.matrix().trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn driven_amplitude_within_euler_bound() {
        let (kappa, alpha) = (1.0, 0.25);
        let c = cfg(kappa, 0.0, 0.1, 10, MeasurementKind::Homodyne);
        let cutoff = 12;
        let a = annihilation(cutoff).unwrap();
        let mut s = FockDensityMatrix::vacuum(cutoff).unwrap();
        let mut integ = SmeIntegrator::new(&c, cutoff).unwrap();
        let mut rng = RngStream::new(0, 0);
        let mut signal = Vec::new();
        for step in 1..=60 {
            integ.step(&mut s, C64::new(alpha, 0.0), &mut rng, true, &mut signal).unwrap();
            let t = step as f64 * c.dt;
            let exact = 2.0 * alpha / kappa.sqrt() * (1.0 - (-kappa * t / 2.0).exp());
            let got = s.matrix().trace_product(&a).unwrap();
            let bound = euler_bound(c.inner_dt(), kappa, t, exact);
            assert!((got.re - exact).abs() <= bound && got.im.abs() < 1e-12, "t={t}: {got} vs {exact}");
        }
        assert_eq!(integ.leakage_warnings, 0);
    }

    #[test]
    fn qnd_measurement_collapses_photon_number() {
        let km = 1.0;
        let cutoff = 4;
        let c = cfg(0.0, km, 0.5, 0, MeasurementKind::Qnd);
        let c = SmeConfig { substeps: c.min_substeps(cutoff), ..c };
        let initial = FockDensityMatrix::mixture(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        let steps = (20.0 / (km * c.dt)) as usize;
        let mut finals = Vec::new();
        let mut signal = Vec::new();
        for traj in 0..100 {
            let mut rng = RngStream::new(3, traj);
            let mut integ = SmeIntegrator::new(&c, cutoff).unwrap();
            let mut s = initial.clone();
            for _ in 0..steps {
                signal.clear();
                integ.step(&mut s, C64::new(0.0, 0.0), &mut rng, true, &mut signal).unwrap();
            }
            finals.push(s.number_entropy());
        }
        finals.sort_by(f64::total_cmp);
        let median = finals[finals.len() / 2];
        assert!(median < 0.1, "median entropy {median}");
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let c = cfg(1.0, 0.2, 0.1, 5, MeasurementKind::Homodyne);
        let text = dump_trajectory(&c, &FockDensityMatrix::vacuum(3).unwrap(), C64::new(0.3, 0.0), 2, 7, &mut RngStream::new(0, 0)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trajectory_id,inner_step,time,X,P0,P1,P2");
        assert_eq!(lines.len(), 11);
        assert!(lines[1].starts_with("7,1,0.02,"));
    }

    #[test]
    fn sme_step_function_matches_integrator() {
        let c = cfg(1.0, 0.3, 0.1, 10, MeasurementKind::Homodyne);
        let s0 = FockDensityMatrix::vacuum(5).unwrap();
        let (s1, sig) = sme_step(&s0, &c, C64::new(0.5, 0.0), &mut RngStream::new(4, 0)).unwrap();
        let mut integ = SmeIntegrator::new(&c, 5).unwrap();
        let mut s = s0.clone();
        let mut sig2 = Vec::new();
        integ.step(&mut s, C64::new(0.5, 0.0), &mut RngStream::new(4, 0), true, &mut sig2).unwrap();
        assert_eq!(s1, s);
        assert_eq!(sig, sig2);
        assert!(fock_overlap(&s1, 1).unwrap() > 0.0);
    }
}
