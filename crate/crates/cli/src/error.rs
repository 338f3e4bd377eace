use std::path::{Path, PathBuf};

use serde::Serialize;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Stable, machine-readable error category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Argument,
    NotFound,
    FeatureNotFound,
    Divergence,
    Format,
    Io,
    Render,
    TooLarge,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Offending file, when one is known.
    pub path: Option<PathBuf>,
    /// Offending config or request field, when one is known.
    pub field: Option<String>,
}

/// JSON shape written to stderr on failure.
#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a ErrorKind,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), path: None, field: None }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn argument(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Argument, message)
    }

    pub fn missing(path: &Path) -> Self {
        CliError {
            path: Some(path.to_path_buf()),
            ..Self::new(ErrorKind::NotFound, format!("{} does not exist", path.display()))
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn to_json(&self) -> String {
        let report = ErrorReport {
            error: &self.kind,
            message: &self.message,
            path: self.path.as_ref().map(|p| p.display().to_string()),
            field: self.field.as_deref(),
        };
        serde_json::to_string(&report).expect("error report serializes")
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config | ErrorKind::Argument | ErrorKind::TooLarge => 2,
            _ => 1,
        }
    }
}

impl From<tvinr_core::Error> for CliError {
    fn from(e: tvinr_core::Error) -> Self {
        use tvinr_core::Error as E;
        let kind = match &e {
            E::Argument(_) | E::Bounds(_) => ErrorKind::Argument,
            E::FeatureNotFound => ErrorKind::FeatureNotFound,
            E::Divergence { .. } => ErrorKind::Divergence,
            E::Format { .. } | E::Json(_) | E::Data(_) => ErrorKind::Format,
            E::Render { .. } => ErrorKind::Render,
            E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorKind::NotFound,
            E::Io { .. } | E::Image(_) => ErrorKind::Io,
        };
        let path = match &e {
            E::Io { path, .. } => Some(path.clone()),
            _ => None,
        };
        CliError { path, ..Self::new(kind, e.to_string()) }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

/// Reads a file, reporting a missing file as [`ErrorKind::NotFound`] with its path.
pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        return CliError::missing(path);
    }
    CliError { path: Some(path.to_path_buf()), ..CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())) }
}
