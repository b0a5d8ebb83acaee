//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied a value that violates an operation's precondition
    /// (non-finite state, shape mismatch, out-of-range constant, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A structural precondition of the tabular oracle does not hold
    /// (e.g. the policy-induced chain is not irreducible).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A linear solve or iterative computation failed its residual check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A rollout batch is malformed (missing bootstrap values, wrong shapes).
    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    /// Configuration file or option error.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint file missing, corrupt, or of an unsupported version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: config errors map to 2,
    /// checkpoint errors to 3, everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Checkpoint(_) => 3,
            _ => 1,
        }
    }
}
