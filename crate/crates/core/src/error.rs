use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sector (k={k}, L={loops}, n={legs}): {reason}")]
    InvalidSector {
        k: usize,
        loops: usize,
        legs: usize,
        reason: String,
    },
    #[error("non-generic dimension: omega vanishes at {what}")]
    NonGenericDimension { what: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("graph is disconnected, no spanning tree exists")]
    Disconnected,
    #[error("evaluation error on graph {graph}: {reason}")]
    Evaluation { graph: String, reason: String },
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("run aborted after {completed} samples: {reason}")]
    PartialResult { completed: u64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
