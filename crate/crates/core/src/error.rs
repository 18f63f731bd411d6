use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the auditing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The quantile of a probability at exactly 0 or 1 is infinite.
    #[error("infinite quantile for p = {0}")]
    InfiniteQuantile(f64),

    /// A false positive / negative bound sits at 0 or 1.
    #[error("degenerate rate bound: {0}")]
    DegenerateRate(f64),

    /// A bisection bracket did not contain a sign change.
    #[error("root not bracketed: {0}")]
    NotBracketed(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },

    /// A non-finite value appeared during training or crafting.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed binary input; `offset` is the byte position of the problem.
    #[error("parse error in {path:?} at byte {offset}: {msg}")]
    Parse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for usage and configuration
    /// problems, 2 for runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
