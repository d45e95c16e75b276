use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension overflow: {rows}x{cols} does not fit in memory")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("non-finite value {value} at flat index {index}")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("truncated payload: expected {expected} values, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("trailing data: {extra} bytes after payload")]
    TrailingData { extra: usize },

    #[error("non-binary mask entry {value} at flat index {index}")]
    NonBinaryEntry { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular value decomposition did not converge")]
    DecompositionFailure,

    #[error("incompatible constraint: {0}")]
    IncompatibleConstraint(String),

    #[error("infeasible warm-start mask in row {row}: {reason}")]
    InfeasibleWarmstart { row: usize, reason: String },

    #[error("index {index} is not in the {set} set")]
    IndexNotInSet { index: usize, set: &'static str },

    #[error("empty {0} set")]
    EmptySet(&'static str),

    #[error("enumeration too large: {count} candidates exceeds budget {budget}")]
    TooLarge { count: u128, budget: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
