use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no target found: no row or column has enough foreground pixels")]
    EmptyTarget,

    #[error("ingestion error: cannot read {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("split error: class `{class}` has {count} samples, need at least 2")]
    Split { class: String, count: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("numeric divergence in {context}")]
    Divergence {
        context: String,
        /// Evaluation points recorded before the failure, if any.
        partial_curve: Vec<crate::experiment::CurvePoint>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
