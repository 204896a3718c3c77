use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("non-finite policy gradient from trajectory {trajectory}")]
    NonFiniteTrajectory { trajectory: usize },

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("integration blow-up: trace fell to {trace:e} before renormalization")]
    IntegrationBlowUp { trace: f64 },

    #[error("trajectory {trajectory}: {source}")]
    InTrajectory {
        trajectory: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// True when the error comes from a numerical failure (as opposed to a bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::NonFiniteGradient { .. }
            | Error::NonFiniteTrajectory { .. }
            | Error::Divergence { .. }
            | Error::IntegrationBlowUp { .. } => true,
            Error::InTrajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
