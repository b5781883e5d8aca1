use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value produced at layer {layer}: {detail}")]
    Numeric { layer: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// Every weight of the layer is already masked, so its standard deviation is undefined.
    #[error("layer {0} has no unmasked weights")]
    DegenerateLayer(usize),

    #[error("episode already finished; reset the environment first")]
    EpisodeDone,

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
