use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape(Vec<usize>),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("tape error: {0}")]
    Tape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("model spec error: {0}")]
    Spec(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("refinement error: cannot keep {keep} weights, only {kept} remain")]
    Refinement { keep: usize, kept: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("log error: {0}")]
    Log(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by a bad configuration rather than a failure at runtime.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
