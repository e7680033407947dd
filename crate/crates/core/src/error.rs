use thiserror::Error;

/// Errors produced by validation, numerical routines, and scenario drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} ({context})")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("matrix entry is not finite at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("operator is not Hermitian: max |A - A†| entry = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite: min eigenvalue = {min_eigenvalue:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("POVM elements do not sum to the identity: max deviation = {deviation:.3e}")]
    IncompletePovm { deviation: f64 },

    #[error("density operator trace {trace:.12} deviates from 1 beyond tolerance")]
    NotUnitTrace { trace: f64 },

    #[error("POVM has no element at null index {index} (element count {count})")]
    NullIndexOutOfRange { index: usize, count: usize },

    #[error("operation requires a designated null element but none is set")]
    NullIndexMissing,

    #[error("state is fully blocked: acceptance probability {trace:.3e} is below tolerance")]
    FullyBlocked { trace: f64 },

    #[error("invalid interval bins: {0}")]
    InvalidBins(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalue grid did not converge: last relative change {last_change:.3e} after {doublings} doublings (n = {n_points})")]
    GridNotConverged {
        last_change: f64,
        doublings: usize,
        n_points: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
