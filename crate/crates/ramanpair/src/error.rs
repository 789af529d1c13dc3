use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unphysical grid: {0}")]
    UnphysicalGrid(String),
    #[error("out of support: {0}")]
    OutOfSupport(String),
    #[error("dimension too large: {0}")]
    TooLarge(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("step too large: {0}")]
    StepTooLarge(String),
    #[error("state not normalized: {0}")]
    NotNormalized(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
