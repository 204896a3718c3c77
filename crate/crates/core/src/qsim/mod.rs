//! Driven, decaying cavity under continuous weak measurement, simulated in a
//! truncated Fock space.

mod operators;
mod oracles;
mod sme;
mod state;

pub use operators::{annihilation, drive_hamiltonian, expectation, lindblad_dissipator, number_operator};
pub use sme::{
    dump_trajectory, euler_bound, sme_step, trajectory_csv_header, trajectory_csv_row, MeasurementKind, SmeConfig,
    SmeIntegrator, LEAKAGE_THRESHOLD, STABILITY_LIMIT,
};
pub use state::{fock_overlap, FockDensityMatrix};
pub use oracles::{
    decay_check, driven_check, ensemble_consistency, population_ensemble, qnd_martingale_check, AnalyticCheck,
    EnsembleSeries, MartingaleCheck,
};
