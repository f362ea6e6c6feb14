//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "center {index} of frame {frame_id} is out of bounds: ({x}, {y}) on {width}x{height} grid"
    )]
    CenterOutOfBounds {
        frame_id: String,
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("class index {class_index} is outside catalog of {class_count} classes")]
    UnknownClassIndex {
        class_index: usize,
        class_count: usize,
    },

    #[error("unknown class name {0:?}")]
    UnknownClass(String),

    #[error("duplicate class name {0:?} in catalog")]
    DuplicateClass(String),

    #[error("heatmap shapes differ: {expected:?} vs {got:?} (channels, height, width)")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("cannot split a {width}x{height} grid into {pt} regions")]
    InvalidPartition {
        pt: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("corpus has {len} frames but groups of up to {len_max} were requested")]
    CorpusTooShort { len: usize, len_max: usize },

    #[error("no model has any assigned frames")]
    NoEligibleModel,

    #[error("confidence bound needs at least one sample")]
    EmptySample,

    #[error("malformed document on line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("bad query: {0}")]
    Query(String),

    #[error("bad heatmap file: {0}")]
    HeatmapFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
