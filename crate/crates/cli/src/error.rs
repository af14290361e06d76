use serde::Serialize;
use thiserror::Error;

use dynint_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("cannot read {path}: {message}")]
    ConfigFile { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) | CliError::ConfigFile { .. } => "config",
            CliError::Output { .. } => "output",
            CliError::Core(e) if core_is_config(e) => "config",
            CliError::Core(_) => "runtime",
        }
    }

    /// 2 for configuration problems, 3 for failures during execution.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" | "config" => 2,
            _ => 3,
        }
    }

    /// One-line JSON for the error stream.
    pub fn to_json(&self) -> String {
        let report = ErrorReport {
            error: ErrorBody {
                kind: self.kind(),
                exit_code: self.exit_code(),
                message: self.to_string(),
            },
        };
        serde_json::to_string(&report).expect("error report serializes")
    }
}

fn core_is_config(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::InvalidConfig(_)
            | CoreError::UnknownMap(_)
            | CoreError::Parameter(_)
            | CoreError::Parse { .. }
            | CoreError::OddDimension(_)
            | CoreError::DimensionMismatch { .. }
    )
}
