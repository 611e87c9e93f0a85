use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the tuning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("voltage ({v1} mV, {v2} mV) is outside the device domain")]
    Domain { v1: f64, v2: f64 },

    #[error("value {value} is outside the domain of {what}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("requested resolution {requested} mV/px is not supported by a {native} mV/px scan")]
    UnsupportedResolution { requested: f64, native: f64 },

    #[error("failed to parse field `{field}`: {reason}")]
    Parse { field: String, reason: String },

    #[error("schema version mismatch: expected `{expected}`, found `{found}`")]
    Version { expected: String, found: String },

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("could not draw an in-bounds window after {attempts} attempts")]
    WindowRetries { attempts: usize },

    #[error("the oracle classifier needs ground-truth labels for every window")]
    MissingLabels,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain { .. } => "domain",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Shape(_) => "shape",
            Error::UnsupportedResolution { .. } => "unsupported_resolution",
            Error::Parse { .. } => "parse",
            Error::Version { .. } => "version",
            Error::Divergence { .. } => "divergence",
            Error::Empty(_) => "empty",
            Error::WindowRetries { .. } => "window_retries",
            Error::MissingLabels => "missing_labels",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
