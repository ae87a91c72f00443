use thiserror::Error;

/// Error type shared by every module of the crate.
///
/// The split between `Precondition` and `Numerical` variants is contractual:
/// callers (in particular the CLI) map preconditions to exit code 2 and
/// numerical refusals to exit code 3.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Malformed input data (bad breakpoints, out-of-domain evaluation, …).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation's stated precondition was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A computation was refused on numerical grounds (ill-conditioning,
    /// singular-to-tolerance matrices, unreachable tolerances).
    #[error("numerical refusal: {0}")]
    Numerical(String),

    /// Serialized artifact could not be decoded.
    #[error("deserialization failed: {0}")]
    Deserialize(String),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidInput(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        CoreError::Precondition(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }
}
