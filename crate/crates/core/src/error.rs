//! Error taxonomy shared by the library and the CLI.
//!
//! Three kinds are distinguished because the CLI maps them to distinct exit
//! codes: usage/configuration problems (1), malformed or inconsistent data
//! (2), and numeric failures such as divergence (3).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller misuse: bad arguments, invalid configuration, shape mismatch.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed or inconsistent input data.
    #[error("data error{}: {message}", line_suffix(.line))]
    Data { message: String, line: Option<usize> },

    /// Numeric failure: non-finite values, divergence.
    #[error("numeric error: {0}")]
    Numeric(String),
}

fn line_suffix(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

impl Error {
    pub fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data {
            message: message.into(),
            line: None,
        }
    }

    pub fn data_at(line: usize, message: impl Into<String>) -> Self {
        Error::Data {
            message: message.into(),
            line: Some(line),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric(message.into())
    }

    /// Process exit code the CLI uses for this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data { .. } => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
