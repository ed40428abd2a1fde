use thiserror::Error;

/// Errors produced by the signal, codec and enhancement layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed model container: {0}")]
    Format(String),

    #[error("pipeline failed on run {run}: {source}")]
    Pipeline {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
