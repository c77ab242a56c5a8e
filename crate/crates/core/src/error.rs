use girder_neural::NeuralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular stiffness matrix: {0}")]
    Singular(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Invalid(_) | Error::DigestMismatch { .. } => ErrorKind::Config,
            Error::Singular(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Neural(NeuralError::Checkpoint(_)) | Error::Neural(NeuralError::Json(_)) => ErrorKind::Io,
            Error::Neural(NeuralError::Shape(_)) | Error::Neural(NeuralError::UnknownParameter(_)) => {
                ErrorKind::Config
            }
            Error::Neural(_) => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
