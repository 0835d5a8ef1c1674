//! Crate-wide error type, categorized so the CLI can map failures to
//! stable exit codes (config = 2, data = 3, numeric = 4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad field values, unknown keys, missing files.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// Numerical failure: non-finite states, degenerate matrices, divergence.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
