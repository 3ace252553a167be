//! File formats and error handling for the `combforge` command-line tool.

pub mod format;

use serde_json::Value;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Schema(String),
    /// A check ran and did not pass.
    Failed(String),
    /// A check did not pass; the report says why.
    Rejected(Value),
    Library(combforge::Error),
}

impl From<combforge::Error> for CliError {
    fn from(e: combforge::Error) -> Self {
        match e {
            combforge::Error::Certification(_) | combforge::Error::InvalidComb(_) => CliError::Failed(e.to_string()),
            other => CliError::Library(other),
        }
    }
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) | CliError::Rejected(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::Failed(_) | CliError::Rejected(_) => "verification",
            CliError::Library(_) => "input",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Io(m) | CliError::Schema(m) | CliError::Failed(m) => m.clone(),
            CliError::Rejected(_) => "check failed".into(),
            CliError::Library(e) => e.to_string(),
        }
    }
}

