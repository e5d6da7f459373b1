use thiserror::Error;

/// Errors produced by the simulator and the numerical engines.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or geometry parameter violates its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A call violated an operation's precondition (bad index, mismatched inputs, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// The requested quantity is mathematically undefined for the arguments.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (achieved {achieved:e})")]
    Quadrature { tolerance: f64, achieved: f64 },

    #[error("state space has {states} states, above the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: usize },

    #[error("replica {index}: {source}")]
    Replica {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
