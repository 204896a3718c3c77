//! Analytic and statistical checks of the integrator, shared by tests and
//! the command line.

use rayon::prelude::*;

use super::operators::annihilation;
use super::sme::{euler_bound, MeasurementKind, SmeConfig, SmeIntegrator};
use super::state::FockDensityMatrix;
use crate::error::{Error, Result};
use crate::numkit::{RngStream, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCheck {
    /// Largest |numeric − exact| / bound over all RL steps.
    pub worst_bound_ratio: f64,
    /// Largest Hermitian defect seen after any step.
    pub max_hermitian_defect: f64,
    /// Largest |tr ρ − 1| seen after any step.
    pub max_trace_error: f64,
}

/// κ′ = 0, no drive, start in |1⟩: ⟨n⟩(t) = e^{−κt}.
pub fn decay_check(kappa: f64, dt: f64, substeps: usize, steps: usize, cutoff: usize) -> Result<AnalyticCheck> {
    let config = SmeConfig { kappa, kappa_meas: 0.0, dt, substeps, measurement: MeasurementKind::Homodyne };
    let mut state = FockDensityMatrix::fock(1, cutoff)?;
    run_analytic(&config, &mut state, C64::new(0.0, 0.0), steps, |s, t| {
        (s.mean_photon_number(), (-kappa * t).exp())
    })
}

/// κ′ = 0, vacuum start, constant real drive: ⟨â⟩(t) = (2α/√κ)(1 − e^{−κt/2}).
pub fn driven_check(kappa: f64, alpha: f64, dt: f64, substeps: usize, steps: usize, cutoff: usize) -> Result<AnalyticCheck> {
    let config = SmeConfig { kappa, kappa_meas: 0.0, dt, substeps, measurement: MeasurementKind::Homodyne };
    let a = annihilation(cutoff)?;
    let mut state = FockDensityMatrix::vacuum(cutoff)?;
    run_analytic(&config, &mut state, C64::new(alpha, 0.0), steps, |s, t| {
        let got = s.matrix().trace_product(&a).map(|z| z.re).unwrap_or(f64::NAN);
        (got, 2.0 * alpha / kappa.sqrt() * (1.0 - (-kappa * t / 2.0).exp()))
    })
}

fn run_analytic(
    config: &SmeConfig,
    state: &mut FockDensityMatrix,
    alpha: C64,
    steps: usize,
    observe: impl Fn(&FockDensityMatrix, f64) -> (f64, f64),
) -> Result<AnalyticCheck> {
    let mut integ = SmeIntegrator::new(config, state.cutoff())?;
    let mut rng = RngStream::new(0, 0);
    let mut signal = Vec::new();
    let mut check = AnalyticCheck { worst_bound_ratio: 0.0, max_hermitian_defect: 0.0, max_trace_error: 0.0 };
    for step in 1..=steps {
        signal.clear();
        integ.step(state, alpha, &mut rng, true, &mut signal)?;
        let t = step as f64 * config.dt;
        let (got, exact) = observe(state, t);
        let bound = euler_bound(config.inner_dt(), config.kappa, t, exact);
        check.worst_bound_ratio = check.worst_bound_ratio.max((got - exact).abs() / bound);
        check.max_hermitian_defect = check.max_hermitian_defect.max(state.matrix().hermitian_defect());
        check.max_trace_error = check.max_trace_error.max((state.matrix().trace().re - 1.0).abs());
    }
    Ok(check)
}

/// Across-trajectory mean and standard error of some observable at a set
/// of checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub checkpoints: Vec<usize>,
    pub mean: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
    /// Trace and Hermiticity extremes over every trajectory and step.
    pub max_hermitian_defect: f64,
    pub max_trace_error: f64,
}

/// Runs `n_traj` independent trajectories (trajectory k uses stream k of
/// `seed`) and records the photon-number populations at each checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn population_ensemble(
    config: &SmeConfig,
    initial: &FockDensityMatrix,
    alpha: C64,
    steps: usize,
    checkpoint_every: usize,
    n_traj: usize,
    seed: u64,
    stochastic: bool,
) -> Result<EnsembleSeries> {
    if n_traj < 2 || checkpoint_every == 0 {
        return Err(Error::InvalidArgument("need at least two trajectories and a positive checkpoint stride".into()));
    }
    config.validate(initial.cutoff())?;
    let checkpoints: Vec<usize> = (0..=steps).step_by(checkpoint_every).collect();
    let runs: Vec<(Vec<Vec<f64>>, f64, f64)> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut integ = SmeIntegrator::new(config, initial.cutoff())?;
            let mut rng = RngStream::new(seed, k as u64);
            let mut state = initial.clone();
            let mut signal = Vec::with_capacity(config.substeps);
            let mut rows = vec![state.populations()];
            let (mut herm, mut tr): (f64, f64) = (0.0, 0.0);
            for step in 1..=steps {
                signal.clear();
                integ
                    .step(&mut state, alpha, &mut rng, stochastic, &mut signal)
                    .map_err(|e| Error::InTrajectory { trajectory: k, source: Box::new(e) })?;
                herm = herm.max(state.matrix().hermitian_defect());
                tr = tr.max((state.matrix().trace().re - 1.0).abs());
                if step % checkpoint_every == 0 {
                    rows.push(state.populations());
                }
            }
            Ok((rows, herm, tr))
        })
        .collect::<Result<_>>()?;
    let n = n_traj as f64;
    let dim = initial.cutoff();
    let mut mean = vec![vec![0.0; dim]; checkpoints.len()];
    let mut standard_error = vec![vec![0.0; dim]; checkpoints.len()];
    for c in 0..checkpoints.len() {
        for d in 0..dim {
            let m = runs.iter().map(|r| r.0[c][d]).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r.0[c][d] - m).powi(2)).sum::<f64>() / (n - 1.0);
            mean[c][d] = m;
            standard_error[c][d] = (var / n).sqrt();
        }
    }
    Ok(EnsembleSeries {
        checkpoints,
        mean,
        standard_error,
        max_hermitian_defect: runs.iter().map(|r| r.1).fold(0.0, f64::max),
        max_trace_error: runs.iter().map(|r| r.2).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleCheck {
    /// Mean ⟨n⟩ across trajectories at each checkpoint.
    pub mean_photon_number: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// Largest |mean(t) − ⟨n⟩(0)| / SE(t) over checkpoints after t = 0.
    pub max_drift_in_se: f64,
    pub max_hermitian_defect: f64,
    pub max_trace_error: f64,
}

/// κ = 0, no drive, QND measurement of â†â: the trajectory average of ⟨n⟩
/// must stay at its initial value.
pub fn qnd_martingale_check(
    kappa_meas: f64,
    dt: f64,
    steps: usize,
    checkpoint_every: usize,
    populations: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<MartingaleCheck> {
    let initial = FockDensityMatrix::mixture(populations)?;
    let cutoff = initial.cutoff();
    let probe = SmeConfig { kappa: 0.0, kappa_meas, dt, substeps: 1, measurement: MeasurementKind::Qnd };
    let config = SmeConfig { substeps: probe.min_substeps(cutoff), ..probe };
    let n0 = initial.mean_photon_number();
    let n_trajf = n_traj as f64;
    // ⟨n⟩ per trajectory is a linear function of the populations, so its
    // spread needs the per-trajectory values, not the population SEs.
    let runs: Vec<(Vec<f64>, f64, f64)> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut integ = SmeIntegrator::new(&config, cutoff)?;
            let mut rng = RngStream::new(seed, k as u64);
            let mut state = initial.clone();
            let mut signal = Vec::with_capacity(config.substeps);
            let mut values = Vec::new();
            let (mut herm, mut tr): (f64, f64) = (0.0, 0.0);
            for step in 1..=steps {
                signal.clear();
                integ
                    .step(&mut state, C64::new(0.0, 0.0), &mut rng, true, &mut signal)
                    .map_err(|e| Error::InTrajectory { trajectory: k, source: Box::new(e) })?;
                herm = herm.max(state.matrix().hermitian_defect());
                tr = tr.max((state.matrix().trace().re - 1.0).abs());
                if step % checkpoint_every == 0 {
                    values.push(state.mean_photon_number());
                }
            }
            Ok((values, herm, tr))
        })
        .collect::<Result<_>>()?;
    let n_points = runs.first().map_or(0, |r| r.0.len());
    let mut mean_photon_number = Vec::with_capacity(n_points);
    let mut standard_error = Vec::with_capacity(n_points);
    let mut max_drift_in_se: f64 = 0.0;
    for c in 0..n_points {
        let m = runs.iter().map(|r| r.0[c]).sum::<f64>() / n_trajf;
        let var = runs.iter().map(|r| (r.0[c] - m).powi(2)).sum::<f64>() / (n_trajf - 1.0);
        let se = (var / n_trajf).sqrt();
        max_drift_in_se = max_drift_in_se.max((m - n0).abs() / se);
        mean_photon_number.push(m);
        standard_error.push(se);
    }
    Ok(MartingaleCheck {
        mean_photon_number,
        standard_error,
        max_drift_in_se,
        max_hermitian_defect: runs.iter().map(|r| r.1).fold(0.0, f64::max),
        max_trace_error: runs.iter().map(|r| r.2).fold(0.0, f64::max),
    })
}

/// Largest |stochastic mean − deterministic| / SE over the diagonal entries
/// at every checkpoint.
pub fn ensemble_consistency(
    config: &SmeConfig,
    initial: &FockDensityMatrix,
    alpha: C64,
    steps: usize,
    checkpoint_every: usize,
    n_traj: usize,
    seed: u64,
) -> Result<f64> {
    let stochastic = population_ensemble(config, initial, alpha, steps, checkpoint_every, n_traj, seed, true)?;
    let deterministic = population_ensemble(config, initial, alpha, steps, checkpoint_every, 2, seed, false)?;
    let mut worst: f64 = 0.0;
    for c in 1..stochastic.checkpoints.len() {
        for d in 0..initial.cutoff() {
            let diff = (stochastic.mean[c][d] - deterministic.mean[c][d]).abs();
            let se = stochastic.standard_error[c][d];
            // populations pinned at zero have no spread and no difference
            if se > 0.0 {
                worst = worst.max(diff / se);
            } else if diff > 1e-12 {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(worst)
}
