use std::fmt;
use std::path::{Path, PathBuf};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const THERMAL_TIMEOUT: u8 = 4;
}

#[derive(Debug)]
pub enum CliError {
    /// Unparseable or invalid input, anchored at a line when one is known.
    Validation {
        file: PathBuf,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    Io { path: PathBuf, source: std::io::Error },
    Model(softrigid::Error),
}

impl CliError {
    pub fn validation(file: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Validation {
            file: file.to_path_buf(),
            line,
            column: None,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => exit::VALIDATION,
            CliError::Io { .. } | CliError::Model(_) => exit::FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation {
                file,
                line,
                column,
                message,
            } => {
                write!(f, "{}", file.display())?;
                if let Some(line) = line {
                    write!(f, ":{line}")?;
                }
                if let Some(column) = column {
                    write!(f, ":{column}")?;
                }
                write!(f, ": {message}")
            }
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<softrigid::Error> for CliError {
    fn from(e: softrigid::Error) -> Self {
        CliError::Model(e)
    }
}

/// Wraps a serde_json error, moving its location into the line/column
/// fields.
pub(crate) fn from_json(file: &Path, e: &serde_json::Error) -> CliError {
    let text = e.to_string();
    let message = match text.rfind(" at line ") {
        Some(i) if e.line() > 0 => text[..i].to_string(),
        _ => text,
    };
    CliError::Validation {
        file: file.to_path_buf(),
        line: (e.line() > 0).then_some(e.line()),
        column: (e.column() > 0).then_some(e.column()),
        message,
    }
}
