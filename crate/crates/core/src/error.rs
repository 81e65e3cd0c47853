use thiserror::Error;

/// Errors and typed outcomes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid measure space: {0}")]
    InvalidMeasure(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (lambda_min = {lambda_min:.6e})")]
    NotPsd { lambda_min: f64 },

    #[error("truncation level {level} outside 1..={max}")]
    BadTruncation { level: usize, max: usize },

    #[error("baseline second moment has a negative eigenvalue {lambda_min:.6e}")]
    DegenerateSpec { lambda_min: f64 },

    #[error("Gram matrix is not coercive: lambda_min = {lambda_min:.6e} < c_min = {c_min:.6e}")]
    NotCoercive { lambda_min: f64, c_min: f64 },

    /// The cost infimum is not attained: some row of the cross matrix leaves ran(M).
    #[error("no minimizer: cross matrix leaves ran(M) by {range_violation:.6e}")]
    NoMinimizer { range_violation: f64 },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("frequency grid of size {n_f} too small (need at least {min})")]
    BadGrid { n_f: usize, min: usize },

    #[error("wrong dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error(
        "circulant embedding is not PSD: lambda_min = {lambda_min:.6e} at frequency index {frequency_index}; try a larger period"
    )]
    EmbeddingNotPsd { lambda_min: f64, frequency_index: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ShapeMismatch(msg.into()))
}
