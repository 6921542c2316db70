use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("not sub-Gaussian: {0}")]
    NotSubGaussian(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("unbounded set has infinite Gaussian width: {0}")]
    UnboundedWidth(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("anchor is not feasible: {0}")]
    InvalidAnchor(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("scaling fit undefined: {0}")]
    FitUndefined(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: usize, got: usize) -> Self {
        Error::Shape { expected, got }
    }

    /// Process exit code used by the CLI: 2 for bad input or configuration,
    /// 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure(_) | Error::NotSubGaussian(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
