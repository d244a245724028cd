use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid SRV curve: {0}")]
    InvalidSrv(String),

    #[error("grid mismatch: expected {expected} samples, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero mark dispersion: {0}")]
    ZeroDispersion(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
