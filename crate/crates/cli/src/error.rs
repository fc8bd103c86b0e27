use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure class, mapped to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, calibration or arguments; nothing was processed.
    Config,
    /// A stage failed on valid inputs.
    Processing,
    /// Reading or writing a file failed.
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Processing => 3,
            ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{}{message}", stage.map(|s| format!("stage {s}: ")).unwrap_or_default())]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<&'static str>,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            stage: None,
            message: message.into(),
        }
    }

    pub fn processing(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Processing,
            stage: Some(stage),
            message: err.to_string(),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Io,
            stage: None,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn in_stage(mut self, stage: &'static str) -> Self {
        self.stage.get_or_insert(stage);
        self
    }
}

/// Resolves `path` against `base` unless it is absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
