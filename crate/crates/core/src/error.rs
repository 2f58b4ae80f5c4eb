use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("line {line}: empty {field}")]
    EmptyField { line: usize, field: &'static str },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("word {0:?} is not in the vector store")]
    OutOfVocabulary(String),

    #[error("no token of the sentence has a vector")]
    AllOutOfVocabulary,

    #[error("unknown placeholder var{0}")]
    UnknownPlaceholder(usize),

    #[error("record {0:?} has no similarity score")]
    Unscored(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient coverage: need {needed} perturbed samples, only {available} available")]
    InsufficientCoverage { needed: usize, available: usize },

    #[error("missing records: {0}")]
    MissingRecords(String),

    #[error("no reference snippet for prediction {0:?}")]
    MissingReference(String),

    #[error("label sets do not share ids: {0}")]
    IdMismatch(String),

    #[error("syntax checker failure: {0}")]
    Checker(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSplit(_) => 1,
            Error::Checker(_) => 3,
            _ => 2,
        }
    }
}
