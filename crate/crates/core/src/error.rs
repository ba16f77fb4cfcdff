use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid association hypothesis: {0}")]
    Validity(Violation),

    #[error("covariance is not positive semi-definite: {0}")]
    NotPsd(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI's error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Validity(_) => "validity",
            Error::NotPsd(_) => "not_psd",
            Error::Parameter(_) => "parameter",
            Error::Inconsistent(_) => "inconsistent",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
