use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown {kind} family `{name}`; supported: {supported}")]
    UnknownFamily {
        kind: &'static str,
        name: String,
        supported: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("solution blew up at t = {t}: |u|_V = {norm_v}")]
    BlowUp { t: f64, norm_v: f64 },

    #[error("time grid: {0}")]
    Grid(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found} (this build reads version {expected}); re-export the file with a matching tool version")]
    Version { found: u32, expected: u32 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::UnknownFamily { .. } => "unknown_family",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BlowUp { .. } => "blow_up",
            Error::Grid(_) => "grid",
            Error::Format(_) => "format",
            Error::Version { .. } => "version",
            Error::Parse { .. } => "parse",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
