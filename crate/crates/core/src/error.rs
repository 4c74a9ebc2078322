use thiserror::Error;

/// Errors raised by the operator, model, simulation and identification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not skew-Hermitian (deviation {deviation:.3e})")]
    NotSkewHermitian { deviation: f64 },

    #[error("matrix is not traceless (|trace| = {trace:.3e})")]
    NotTraceless { trace: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("closure did not reach a fixpoint within {cap} sweeps (dimension {dimension})")]
    IterationCap { cap: usize, dimension: usize },

    #[error("unsupported number of spins {0} (supported: 1..=3)")]
    UnsupportedSpins(usize),

    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),

    #[error(
        "flipped partner state is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})"
    )]
    UnphysicalPartner { min_eigenvalue: f64 },

    #[error("ill-conditioned moment system: {0}")]
    IllConditioned(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid experiment record: {0}")]
    InvalidRecord(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
