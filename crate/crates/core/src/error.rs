use thiserror::Error;

use crate::sample::Shape;

/// Errors raised by every layer of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape extents must all be >= 1 and non-empty, got {0:?}")]
    InvalidShape(Vec<usize>),

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("quantization grid must be finite and > 0, got {0}")]
    InvalidGrid(f64),

    #[error("merge radius must be finite and > 0, got {0}")]
    InvalidRadius(f64),

    #[error("input set is empty")]
    EmptyInput,

    #[error("codebook has no archetypes")]
    Untrained,

    #[error("archetype id {id} out of range (codebook has {len})")]
    ArchetypeOutOfRange { id: usize, len: usize },

    #[error("value does not match any archetype of the first primitive")]
    NoMatchingArchetype,

    #[error("expected {expected} parts, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("levels must be >= 1 and <= {max}, got {found}")]
    InvalidLevels { max: usize, found: usize },

    #[error("pyramid primitives differ within a level; projection requires the caller-supplied sibling route")]
    HeterogeneousPyramid,

    #[error("pattern completion needs at least one known and one unknown slot")]
    NothingToComplete,

    #[error("slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },

    #[error("invalid architecture: {0}")]
    Graph(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("{0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
