use thiserror::Error;

/// Errors raised by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("channel Gram matrix is singular on subcarrier {subcarrier}")]
    Singular { subcarrier: usize },

    #[error("degenerate covariance: diagonal entry {index} is {value}")]
    DegenerateCovariance { index: usize, value: f64 },

    #[error("normalized correlation {value} at ({row}, {col}) exceeds unit magnitude")]
    CorrelationOutOfRange { row: usize, col: usize, value: f64 },

    #[error("precoder is not frequency-flat")]
    NotFlat,

    #[error("sample index {index} outside stream [{start}, {end}): guard padding insufficient")]
    OutOfRange { index: i64, start: i64, end: i64 },

    #[error("outside the analysis domain: {0}")]
    AnalysisDomain(String),

    #[error("misaligned symbol grids: {0}")]
    Misaligned(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
