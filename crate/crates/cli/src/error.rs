use std::fmt;

use facmon_api::ApiError;

/// A failed command: a machine-readable code, a message and an exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.to_string(),
            message: message.into(),
            exit: EXIT_FAILURE,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit: EXIT_USAGE,
            ..CliError::new("USAGE", message)
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<facmon_core::Error> for CliError {
    fn from(e: facmon_core::Error) -> Self {
        match &e {
            facmon_core::Error::ImportRow { source, .. } => {
                CliError::new(e.code(), format!("{e} [{}]", source.root().code()))
            }
            _ => CliError::new(e.code(), e.to_string()),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        let message = match &e.details {
            Some(details) => format!("{} {}", e.message, details),
            None => e.message,
        };
        CliError::new(&e.code, message)
    }
}

impl From<facmon_api::ServeError> for CliError {
    fn from(e: facmon_api::ServeError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("IO_ERROR", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new("SERIALIZATION_ERROR", e.to_string())
    }
}

impl From<reqwest::Error> for CliError {
    fn from(e: reqwest::Error) -> Self {
        CliError::new("REMOTE_UNREACHABLE", e.to_string())
    }
}
