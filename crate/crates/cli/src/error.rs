use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Compute(#[from] fwdsmile::Error),
    #[error("{failed} comparison row(s) outside the 3-sigma band")]
    ComparisonFailed { failed: usize },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Compute(_) => "compute",
            CliError::ComparisonFailed { .. } => "comparison-failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) | CliError::Io { .. } => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::ComparisonFailed { .. } => 3,
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self, command: Option<&str>) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            message: String,
            command: Option<&'a str>,
            exit_code: i32,
        }
        let r = Record { error: self.kind(), message: self.to_string(), command, exit_code: self.exit_code() };
        serde_json::to_string(&r).expect("error record serializes")
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
