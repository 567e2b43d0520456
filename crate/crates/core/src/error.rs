use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("genome already has the maximum of {max_layers} hidden layers")]
    Capacity { max_layers: usize },

    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("degenerate interval: both states share timestamp {timestamp}")]
    DegenerateInterval { timestamp: f64 },

    #[error("state is not discharging; charging states are filtered out")]
    FilteredState,

    #[error("settings changed between consecutive states (feature `{feature}`)")]
    SettingsChanged { feature: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in tensor `{tensor}`")]
    NumericFault { tensor: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
