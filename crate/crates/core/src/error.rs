use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {message}{}", condition_suffix(*.condition_number))]
    NumericFailure {
        message: String,
        condition_number: Option<f64>,
    },

    #[error("format error in {path} at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("undefined result: {0}")]
    UndefinedResult(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn condition_suffix(c: Option<f64>) -> String {
    match c {
        Some(c) => format!(" (condition number {c:.3e})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            condition_number: None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NumericFailure { .. } => "numeric-failure",
            Error::Format { .. } => "format-error",
            Error::Ingestion(_) => "ingestion-error",
            Error::UndefinedResult(_) => "undefined-result",
            Error::ResourceLimit(_) => "resource-limit",
            Error::Io { .. } => "io-error",
            Error::Json { .. } => "format-error",
        }
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
