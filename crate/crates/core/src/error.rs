use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, reported before a run starts.
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    /// The delayed-feedback protocol was driven out of order.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// An internal invariant of the algorithm or a data structure failed.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("run for seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Error::Invariant(message.into())
    }

    /// True for configuration errors, including those wrapped by a batch run.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Json(_) => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
