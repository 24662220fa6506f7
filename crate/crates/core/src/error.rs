use thiserror::Error;

/// Errors raised by the estimation, inference, simulation and ingest layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tick series: {0}")]
    InvalidSeries(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("pre-averaging window kn={kn} out of range for n={n}")]
    WindowOutOfRange { kn: usize, n: usize },

    #[error("weight matrix is singular (condition number {condition:e})")]
    SingularWeights { condition: f64 },

    #[error("non-positive variance at index {index}")]
    NonPositiveVariance { index: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("ingest: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the inputs'
    /// shape or format.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularWeights { .. } | Error::NonPositiveVariance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
