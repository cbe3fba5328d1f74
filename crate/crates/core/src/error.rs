use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: io error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file is not syntactically a record; `field` names what was wrong.
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    /// The record parsed but broke one or more domain invariants.
    #[error("record {patient_id} failed validation: {}", .violations.join("; "))]
    Validation {
        patient_id: String,
        violations: Vec<String>,
    },

    #[error("unknown lead `{0}`")]
    UnknownLead(String),

    #[error("dataset split needs exactly {expected} distinct patients, got {actual}")]
    SplitSize { expected: usize, actual: usize },

    #[error("invalid filter: {0}")]
    Filter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid target: {0}")]
    Target(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ensemble has no members")]
    EmptyEnsemble,

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}
