//! Error type shared by the whole crate.

use thiserror::Error;

/// Unified error type for configuration, numerical, and inversion failures.
///
/// The CLI maps variants to process exit codes: invalid input/configuration
/// → 2, numerical failure → 3, no isoline intersection → 4, ambiguous
/// inversion → 5, I/O → 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The run configuration is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed (non-finite values, non-convergence,
    /// unphysical state).
    #[error("numerical failure: {0}")]
    Numerics(String),

    /// Loss inversion: no point of the forward map is compatible with the
    /// measured g² pair (the two isolines do not cross).
    #[error("loss inversion found no isoline intersection: {0}")]
    NoIntersection(String),

    /// Loss inversion: several well-separated parameter points reproduce the
    /// measured g² pair.
    #[error("loss inversion is ambiguous: {0}")]
    Ambiguous(String),

    /// Underlying file-system error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) => 2,
            Error::Numerics(_) => 3,
            Error::NoIntersection(_) => 4,
            Error::Ambiguous(_) => 5,
            Error::Io(_) => 1,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
