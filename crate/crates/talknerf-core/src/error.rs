//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite loss at step {step}: {value}")]
    NonFiniteLoss { step: usize, value: f64 },

    #[error("non-finite gradient in tensor '{0}'")]
    NonFiniteGrad(String),

    #[error("coarse loss: face pixel set is empty")]
    EmptyFaceSet,

    #[error("attention over a ray with no samples")]
    EmptyRay,

    #[error("empty mask")]
    EmptyMask,

    #[error("missing landmark '{0}'")]
    MissingLandmark(String),

    #[error("shape mismatch for '{name}': expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
