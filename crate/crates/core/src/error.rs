use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the toolkit.
///
/// [`Error::kind`] groups variants into the coarse classes used for process
/// exit codes and HTTP status mapping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence gap: frame {index} is missing")]
    SequenceGap { index: usize },

    #[error("dimension mismatch at {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: String,
        found: String,
    },

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported pixel format in {path}: {format} (only 8-bit gray or RGB)")]
    UnsupportedFormat { path: PathBuf, format: String },

    #[error("coordinate out of bounds: {0}")]
    Bounds(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("image too small: {0}")]
    Size(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or missing input data.
    Input,
    /// Invalid parameters or an infeasible request.
    Parameter,
    /// The environment failed us (filesystem, permissions).
    Environment,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SequenceGap { .. }
            | Error::Dimension { .. }
            | Error::Decode { .. }
            | Error::UnsupportedFormat { .. }
            | Error::Bounds(_)
            | Error::EmptyInput(_)
            | Error::Size(_)
            | Error::Shape(_)
            | Error::NonFinite(_) => ErrorKind::Input,
            Error::Parameter(_) | Error::Infeasible(_) | Error::Json(_) => ErrorKind::Parameter,
            Error::Io { source, .. } => match source.kind() {
                std::io::ErrorKind::NotFound => ErrorKind::Input,
                _ => ErrorKind::Environment,
            },
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::SequenceGap { .. } => "sequence_gap",
            Error::Dimension { .. } => "dimension",
            Error::Decode { .. } => "decode",
            Error::UnsupportedFormat { .. } => "unsupported_format",
            Error::Bounds(_) => "bounds",
            Error::EmptyInput(_) => "empty_input",
            Error::Parameter(_) => "parameter",
            Error::Infeasible(_) => "infeasible",
            Error::Size(_) => "size",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// Wraps an I/O failure with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dimension(
        what: impl Into<String>,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            what: what.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
