//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type. Variants map onto the failure classes the public
/// operations are contracted to report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file or container did not match the expected on-disk format.
    /// `field` names the offending manifest/header field.
    #[error("format error in `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("illegal transition: {0}")]
    IllegalTransition(String),

    /// Negative sampling cannot produce the requested number of candidates.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// A node feature vector has zero variance, so Pearson similarity is undefined.
    #[error("degenerate feature at node {node}: zero variance across dimensions")]
    DegenerateFeature { node: usize },

    /// A loss or update produced a non-finite value. `breakdown` lists the
    /// per-component values observed at the failure point.
    #[error("numeric error: {context} (breakdown: {breakdown})")]
    Numeric { context: String, breakdown: String },

    /// Artifacts from different pipeline stages disagree on the resolved config.
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    /// A test-split action id leaked into a training artifact.
    #[error("leakage: {0}")]
    Leakage(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
