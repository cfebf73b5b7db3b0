use std::io;

/// Errors produced by trace I/O, configuration checks, and simulation runs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed trace file: bad magic, truncated header, or torn record.
    #[error("trace format error: {0}")]
    Format(String),

    /// A record violates a stream invariant; `index` is the zero-based
    /// position of the offending record.
    #[error("validation error at record {index}: {reason}")]
    Validation { index: u64, reason: String },

    /// An argument is outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The synthetic generator ran out of transient address space.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Inconsistent or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
