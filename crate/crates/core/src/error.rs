use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The trigonometric sum of a covariance table went below the negative tolerance.
    #[error("not a spectral density: minimum value {min_value:e} below -{threshold:e}")]
    NotADensity { min_value: f64, threshold: f64 },

    #[error(
        "no convergence at z = {z} (stage {stage}): residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence {
        z: Complex64,
        stage: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("eigensolver did not converge for eigenvalue index {index}")]
    NoConvergenceEig { index: usize },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
