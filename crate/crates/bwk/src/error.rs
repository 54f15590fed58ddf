//! Error type shared across the crate.

/// Errors surfaced by library operations.
#[derive(Debug, thiserror::Error)]
pub enum BwkError {
    /// An arm or resource index was out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A scalar parameter violated its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An instance had the wrong shape (arm/resource counts) for an operation.
    #[error("instance shape mismatch: {0}")]
    Shape(String),

    /// A caller-supplied object did not satisfy an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear program had no feasible point.
    #[error("infeasible linear program: {0}")]
    Infeasible(String),

    /// A combinatorial size bound was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Two routes to the same quantity disagreed beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    /// A case split is undefined at the boundary.
    #[error("boundary case undefined: {0}")]
    Boundary(String),

    /// Too few samples or traces for a statistical estimate.
    #[error("sample size too small: {0}")]
    SampleSize(String),

    /// Rejection sampling exhausted its attempt budget.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Malformed or out-of-range data in a serialized instance or config.
    #[error("invalid data: {0}")]
    InvalidData(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, BwkError>;
