use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("root finding diverged after {iterations} iterations (degree {degree}, theta {theta})")]
    RootFindingDiverged {
        degree: usize,
        iterations: usize,
        theta: f64,
    },

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    QuadratureNotConverged { tolerance: f64, estimate: f64 },

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("could not tabulate the quadrature distribution: total mass {mass} deviates from 1")]
    TabulationFailed { mass: f64 },

    #[error("no sample batch for window angle {theta}")]
    AngleMismatch { theta: f64 },

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("Fock truncation insufficient: missing norm {missing:e} with {n_trunc} levels")]
    TruncationInsufficient { missing: f64, n_trunc: usize },

    #[error("eigensolver failed to converge after {sweeps} sweeps")]
    EigensolverFailed { sweeps: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WitnessError>;
