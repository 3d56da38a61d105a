use std::path::Path;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ORACLE_FAIL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] svqkd_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Parse(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }

    /// Extra guidance printed under the message.
    pub fn hint(&self) -> Option<String> {
        match self {
            CliError::Core(svqkd_core::Error::AttackUndefined(v)) => Some(format!(
                "the convex-combination attack needs visibility >= 1/sqrt(2) ~ 0.7071 (got {v}); \
                 below that the local weight would exceed 1"
            )),
            _ => None,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}
