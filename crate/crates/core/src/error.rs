use std::io;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("training failed: {0}")]
    TrainingFailure(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parameter(_)
            | Error::Format(_)
            | Error::Validation(_)
            | Error::Io(_) => 2,
            Error::Numerical(_)
            | Error::TrainingFailure(_)
            | Error::DegenerateInput(_)
            | Error::DegenerateLabels(_)
            | Error::InsufficientData(_)
            | Error::Shape(_) => 3,
        }
    }
}
