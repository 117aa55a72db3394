use thiserror::Error;

/// Errors surfaced by solvers, trainers and file I/O.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("objective diverged: {0}")]
    Diverged(String),
    #[error("linear algebra backend failure: {0}")]
    Linalg(String),
    #[error("missing group partition for grouped proximal kind")]
    MissingPartition,
    #[error("empty dictionary")]
    EmptyDictionary,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    MalformedFile(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
