//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure category, used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid configuration or construction parameters.
    Config,
    /// Problems with input data: files, schemas, degenerate columns.
    Data,
    /// Numerical failure during evaluation or training.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline grid: {0}")]
    InvalidGrid(String),

    #[error("invalid network shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch at {path}: {message}")]
    DimensionMismatch { path: String, message: String },

    #[error("unknown basis '{id}' at {path}")]
    UnknownBasis { id: String, path: String },

    #[error("model document violates schema at {path}: {message}")]
    SchemaViolation { path: String, message: String },

    #[error("basis '{basis}' is singular at {input}")]
    SingularBasis { basis: String, input: f64 },

    #[error("non-finite value in layer {layer}, edge ({row},{col})")]
    NonFinite { layer: usize, row: usize, col: usize },

    #[error("training diverged at step {step}; last finite loss {last_loss}")]
    Diverged { step: usize, last_loss: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("edges still in spline form: {0}")]
    Unsnapped(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("column '{0}' not found")]
    MissingColumn(String),

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("no usable rows after dropping malformed entries")]
    NoUsableRows,

    #[error("invalid parameter range: {0}")]
    InvalidRange(String),

    #[error("undefined correlation: column '{0}' is constant")]
    ConstantInput(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("formula parse error at offset {offset}: {message}")]
    FormulaParse { offset: usize, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidShape(_)
            | Error::InvalidConfig(_)
            | Error::InvalidRange(_) => ErrorKind::Config,
            Error::MissingColumn(_)
            | Error::EmptyFile
            | Error::NoUsableRows
            | Error::EmptyBatch
            | Error::ConstantInput(_)
            | Error::LengthMismatch { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::SchemaViolation { .. }
            | Error::DimensionMismatch { .. }
            | Error::UnknownBasis { .. }
            | Error::FormulaParse { .. } => ErrorKind::Data,
            Error::SingularBasis { .. }
            | Error::NonFinite { .. }
            | Error::Diverged { .. }
            | Error::Unsnapped(_) => ErrorKind::Numerical,
        }
    }
}
