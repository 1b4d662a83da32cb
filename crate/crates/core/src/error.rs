use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must have full column rank does not.
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    /// The watermark payload does not fit in the configured length.
    #[error("watermark capacity exceeded: payload needs {needed} symbols, only {capacity} available")]
    WatermarkCapacity { needed: usize, capacity: usize },

    /// A thresholded watermark could not be parsed back into a mask.
    #[error("watermark decode failed: {0}")]
    WatermarkDecode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
