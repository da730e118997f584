use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("unsupported or corrupt audio in {path}: {reason}")]
    Audio { path: PathBuf, reason: String },

    #[error(
        "unvoiceable recording: {voiced} of {total} frames voiced (need at least 50%), \
         mean peak correlation {mean_peak:.3}"
    )]
    Unvoiceable {
        voiced: usize,
        total: usize,
        mean_peak: f64,
    },

    #[error("insufficient cycles: found {found}, need at least {required}")]
    InsufficientCycles { found: usize, required: usize },

    #[error("{what} too short: need at least {required}, got {actual}")]
    TooShort {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("no voiced frames")]
    NoVoicedFrames,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("table format error: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad inputs (files, manifests, arguments) as opposed to
    /// failures inside the numerical pipeline.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Manifest(_)
                | Error::Audio { .. }
                | Error::Format(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::InvalidInput(_)
        )
    }
}
