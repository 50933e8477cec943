use std::path::PathBuf;

/// Errors surfaced by configuration loading, solving and output writing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An internal invariant did not hold (a bug, not a user error).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The exhaustive solver was asked for an instance beyond its cap.
    #[error("instance too large for exhaustive search: {0} assignments")]
    InstanceTooLarge(f64),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
