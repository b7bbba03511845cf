use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A network state left the finite/bounded regime during integration.
    #[error("divergence in {phase} phase at step {step}: max |x| = {max_abs:.3e}")]
    Divergence {
        phase: &'static str,
        step: u64,
        max_abs: f64,
    },

    /// A numerical routine (eigensolver, decomposition) failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed input file (CSV, checkpoint).
    #[error("format error: {0}")]
    Format(String),

    /// An operation was called on an object missing required state.
    #[error("state error: {0}")]
    State(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
