use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes, sizes or configuration do not satisfy an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Euler–Maruyama produced a non-finite state.
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    /// The propagator ODE produced a non-finite coefficient.
    #[error("non-finite coefficient {index} at t = {t}")]
    NonFiniteCoefficient { t: f64, index: String },

    /// Training produced a non-finite loss.
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
