use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: unknown category `{value}`")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("label column has {found} distinct values, expected {expected}")]
    LabelCount { expected: String, found: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {0} is absent from the training split")]
    ClassAbsent(i32),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("reports were computed on different splits or baselines")]
    MismatchedSplits,
    #[error("attribution contract breach: logit change is zero but output changed by {0}")]
    ActivationContract(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("serialization: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
