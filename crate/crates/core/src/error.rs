use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("world generation failed: could not place {entity} within {attempts} attempts")]
    Generation { entity: String, attempts: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss in {0}; parameters rolled back")]
    NonFiniteLoss(String),

    #[error("config hash mismatch: artifact was produced with {expected}, current config is {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error("replay diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
