use std::fmt;
use std::process::ExitCode;

/// Failure classes mapped to exit codes: validation 2, internal 1.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Validation(_) => ExitCode::from(2),
            Self::Internal(_) => ExitCode::from(1),
        }
    }

    /// One-line JSON for the diagnostic stream.
    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            Self::Validation(m) => ("validation", m.clone()),
            Self::Internal(e) => ("internal", format!("{e:#}")),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "{m}"),
            Self::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<yieldopt::Error> for CliError {
    fn from(e: yieldopt::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Internal(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Internal(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Internal(e.into())
    }
}
