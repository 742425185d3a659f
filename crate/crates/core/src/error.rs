use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the admissible set (negative coefficient,
    /// non-finite field value, violated ordering of scaling factors, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Singular linear system, e.g. pure Neumann problem with a source of nonzero mean.
    #[error("solvability error: {0}")]
    Solvability(String),

    #[error("iteration diverged: sup-norm {norm:e} exceeded {threshold:e}")]
    Divergence { norm: f64, threshold: f64 },

    /// A time step could not be completed; the controller may retry with a smaller `dt`.
    #[error("time step failed at dt = {dt:e}: {reason}")]
    Step { dt: f64, reason: String },

    #[error("state error: {0}")]
    State(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
