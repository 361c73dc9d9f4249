use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: malformed JSON: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: malformed PFM: {reason}")]
    Pfm { path: PathBuf, reason: String },

    #[error("{field}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: String,
        found: String,
    },

    #[error("{field}: non-finite value at index {index}")]
    NonFinite { field: String, index: usize },

    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{param} = {value} outside admissible range {range}")]
    OutOfRange {
        param: String,
        value: f64,
        range: String,
    },

    #[error("light {light_id}: mask is empty")]
    EmptyMask { light_id: String },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("light {0} is disabled")]
    DisabledLight(String),

    #[error("unknown light id {0}")]
    UnknownLight(String),

    #[error("incompatible light types: {0}")]
    Incompatible(String),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("occlusion-boundary mask covers the whole image")]
    MaskCoversImage,

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),

    #[error("optimization diverged at iteration {iteration}: loss increased for {streak} consecutive iterations")]
    Divergence { iteration: usize, streak: usize },

    #[error("{0}: the clamped re-render provides no gradient")]
    Saturated(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
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

    /// Short stable identifier, used by the CLI's machine-readable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Pfm { .. } => "pfm",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::Invalid { .. } => "invalid",
            Error::OutOfRange { .. } => "out_of_range",
            Error::EmptyMask { .. } => "empty_mask",
            Error::Degenerate(_) => "degenerate",
            Error::DisabledLight(_) => "disabled_light",
            Error::UnknownLight(_) => "unknown_light",
            Error::Incompatible(_) => "incompatible",
            Error::EmptyPointSet => "empty_point_set",
            Error::MaskCoversImage => "mask_covers_image",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::Divergence { .. } => "divergence",
            Error::Saturated(_) => "saturated",
        }
    }
}
