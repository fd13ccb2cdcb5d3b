use thiserror::Error;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {key}: {reason}")]
    Config { key: String, reason: String },

    #[error("cannot sample: {0}")]
    Sampling(String),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

impl SimError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn format(path: &std::path::Path, reason: impl std::fmt::Display) -> Self {
        SimError::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Non-finite values produced by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("non-finite activation in {module} at stage {stage}")]
    NonFinite { module: &'static str, stage: usize },

    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
