use std::path::PathBuf;

/// Errors raised by assembly, solvers and the experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {})", .history.last().copied().unwrap_or(f64::NAN))]
    ConvergenceFailure {
        iterations: usize,
        /// Relative residual after every iteration, starting with the initial one.
        history: Vec<f64>,
    },

    #[error("invalid parameter {mu}: {reason}")]
    InvalidParameter { mu: f64, reason: String },

    #[error("degenerate reduced basis: {0}")]
    DegenerateBasis(String),

    #[error("I/O error at {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
