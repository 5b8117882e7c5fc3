use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetimeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested output length cannot be reached by subsampling.
    #[error("infeasible target: {target} output frames from {source_frames} source frames (need target < source)")]
    InvalidTarget { source_frames: usize, target: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl RetimeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RetimeError::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, RetimeError>;
