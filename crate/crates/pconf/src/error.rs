use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Dimensions of two inputs do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid configuration (penalty shape, step size, grid, folds, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The solver produced a non-finite composite objective.
    #[error("solver diverged: non-finite objective at epoch {epoch}")]
    Diverged { epoch: usize },

    /// Data generation produced no positive samples, even after one retry on
    /// the next RNG substream.
    #[error("no positively labeled samples were generated, even after retrying on the next substream")]
    EmptyPositiveSet,

    /// Too many Monte Carlo replications failed for the aggregate to be trusted.
    #[error("{failed} of {total} replications failed (>= 5% limit); failing seeds: {seeds:?}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        seeds: Vec<u64>,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
