use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants map onto the CLI exit-code contract through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two process specifications fail the equivalent-martingale-measure conditions.
    #[error("measures are not equivalent: {0}")]
    NotEquivalent(String),

    /// The Gamma function was evaluated at a non-positive integer.
    #[error("Gamma pole at x = {0}")]
    Pole(f64),

    /// A series, quadrature or optimizer failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A density grid failed its normalization check.
    #[error("mass check failed: {0}")]
    Mass(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }

    /// Process exit code: 2 for domain-type failures, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::NotEquivalent(_) | Error::Pole(_) => 2,
            Error::Convergence(_) | Error::Mass(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
