use std::fmt;

use serde_json::json;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unknown subcommand or flag, malformed value. Exit code 2.
    Usage(String),
    /// The resolved configuration or an input file is invalid. Exit code 3.
    Validation { kind: &'static str, message: String },
    /// Failure while computing. Exit code 1.
    Runtime(fepls::Error),
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation {
            kind: "validation",
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation { kind, .. } => kind,
            CliError::Runtime(e) => e.kind(),
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Validation { message, .. } => f.write_str(message),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

/// Errors in user-supplied values or files are validation failures; the
/// rest happen while computing.
impl From<fepls::Error> for CliError {
    fn from(e: fepls::Error) -> Self {
        match e {
            fepls::Error::Parse { .. } => CliError::Validation {
                kind: "parse",
                message: e.to_string(),
            },
            e => CliError::Runtime(e),
        }
    }
}

pub trait Validate<T> {
    /// Reclassifies a library error as a validation failure.
    fn invalid(self) -> Result<T, CliError>;
}

impl<T> Validate<T> for fepls::Result<T> {
    fn invalid(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Validation {
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}
