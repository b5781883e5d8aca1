use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] purl_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    DataFormat { path: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 data format, 4 numeric failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use purl_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Json(_) => 2,
            HarnessError::DataFormat { .. } | HarnessError::Csv(_) => 3,
            HarnessError::Core(e) => match e {
                E::Config(_) | E::Json(_) => 2,
                E::Format { .. } | E::Checkpoint(_) | E::Dimension(_) => 3,
                E::Numeric { .. } | E::DegenerateLayer(_) => 4,
                E::EpisodeDone | E::Io(_) => 1,
            },
            HarnessError::Io(_) => 1,
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}
