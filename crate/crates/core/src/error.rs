use thiserror::Error;

/// Errors raised by the exploration engine.
#[derive(Debug, Error)]
pub enum DseError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke a documented precondition (missing frequency, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("design space of {size} configurations exceeds the enumeration limit {limit}")]
    TooLarge { size: String, limit: u64 },

    #[error("handshake protocol model did not converge: {0}")]
    ProtocolModel(String),

    #[error("invalid metric input: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, DseError>;

impl DseError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        DseError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
