use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("valuation class violation: {0}")]
    ClassViolation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("capacity exceeded: {what} needs {needed} states, cap is {cap} (raise FAIRDIV_CAP to override)")]
    Capacity { what: String, needed: String, cap: u64 },

    /// A bound proved to hold was violated; always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
