//! Error type shared across the crate.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("null cdf is decreasing on the sorted data at index {0}")]
    NonMonotoneCdf(usize),

    #[error("null cdf hits {value} at data index {index}")]
    CdfBoundary { index: usize, value: f64 },

    #[error("statistic failed at replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
