use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no ground truth")]
    NoGroundTruth,
    #[error("invalid k: {0}")]
    InvalidK(usize),
    #[error("invalid sigma: {0}")]
    InvalidSigma(f64),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid kernel size {0}: must be odd and >= 3")]
    InvalidKernelSize(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("oracle instance too large: min side {0} exceeds 10")]
    OracleTooLarge(usize),
    #[error("points out of bounds at indices {0:?}")]
    OutOfBounds(Vec<usize>),
    #[error("infeasible packing: {0}")]
    InfeasiblePacking(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("invalid format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
