use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("{what} supports at most {cap} features, got {n}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("external model protocol error: {0}")]
    Protocol(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{path}: row {row}, column '{column}': {message}")]
    Data {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("no counterfactual reference for target row {target}: {reason}")]
    NoCounterfactual { target: usize, reason: String },

    #[error("config error at '{key}': {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input or configuration rather
    /// than by a failing computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidInput(_)
                | Error::InvalidPoint(_)
                | Error::DimensionMismatch { .. }
                | Error::Data { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
