use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("coordinate {q} outside axis range [{lo}, {hi}]")]
    OutOfRange { q: f64, lo: f64, hi: f64 },

    #[error("no finite intensity values")]
    EmptyData,

    #[error("invalid range: lo {lo} must be below hi {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimsMismatch([usize; 3], [usize; 3]),

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::Format(_) | Error::Corrupt(_) | Error::InvalidHeader(_) | Error::Config { .. } => 3,
            Error::MissingParameter(_) | Error::InvalidParameter(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
