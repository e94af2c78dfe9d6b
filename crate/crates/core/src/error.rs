use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Chebyshev fit exceeded degree cap {cap}; best sup error {best_error:e}")]
    ChebDegreeExceeded { cap: usize, best_error: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dense reference limited to n <= {cap}, got n = {n}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("estimator contract violated: {0}")]
    Estimator(String),

    #[error(
        "eigensolver did not converge in {iterations} iterations (eigenvalue {eigenvalue}, residual {residual:e})"
    )]
    EigNotConverged {
        iterations: usize,
        eigenvalue: f64,
        residual: f64,
        eigenvector: Vec<f64>,
    },

    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
