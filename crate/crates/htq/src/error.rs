use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An evaluation was requested outside the mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system was numerically singular.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// The spectral oracle could not certify the requested tolerance.
    #[error("oracle not converged: max entry difference {diff:.3e} exceeds tol {tol:.3e} (K_F = {k_f})")]
    OracleNotConverged { diff: f64, tol: f64, k_f: usize },

    /// An internal iteration failed to converge.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
