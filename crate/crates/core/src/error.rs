use thiserror::Error;

/// Every failure the library can report.
///
/// Numerical failures carry the residual or pivot that triggered them so
/// callers can judge how close the computation came to succeeding.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular to working precision (smallest pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("{what} did not converge (residual {residual:.3e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("unsupported form: {0}")]
    Unsupported(String),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("level set not found: {0}")]
    NotFound(String),

    #[error("search window too small: {0}")]
    WindowTooSmall(String),

    #[error("infeasible contour: {0}")]
    Infeasible(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid problem at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
