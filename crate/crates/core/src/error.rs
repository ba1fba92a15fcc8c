use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid document: {0}")]
    Schema(String),
    #[error("compressed RLE strings are not supported; counts must be an integer list")]
    CompressedRle,
    #[error("RLE counts sum to {actual}, expected {expected}")]
    RleLengthMismatch { expected: u64, actual: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("polygon is not convex")]
    NonConvex,
    #[error("prediction {index}: score {score} outside [0, 1]")]
    ScoreRange { index: usize, score: f64 },
    #[error("prediction {index}: unknown image id {image_id}")]
    UnknownImage { index: usize, image_id: u64 },
    #[error("prediction {index}: unknown category id {category_id}")]
    UnknownCategory { index: usize, category_id: u64 },
    #[error("category {name:?} has conflicting supercategories {a:?} and {b:?}")]
    CategoryConflict { name: String, a: String, b: String },
    #[error("darkening percent {0} outside [0, 100]")]
    DarkenRange(i64),
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not place a valid occluder after {0} attempts")]
    RetryExhausted(u32),
    #[error("group has no ground-truth instances")]
    GroupEmpty,
    #[error("template placeholder {{{0}}} does not name a declared parameter")]
    UnknownPlaceholder(String),
    #[error("no run produced metric {0:?}")]
    NoValidRuns(String),
    #[error("external command failed: {0}")]
    Command(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable upper-case code for machine consumers (CLI summaries, C API).
    pub fn code(&self) -> &'static str {
        match self {
            Error::Json(_) => "MALFORMED_JSON",
            Error::Schema(_) => "SCHEMA",
            Error::CompressedRle => "COMPRESSED_RLE",
            Error::RleLengthMismatch { .. } => "RLE_LENGTH_MISMATCH",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::NonConvex => "NON_CONVEX",
            Error::ScoreRange { .. } => "SCORE_RANGE",
            Error::UnknownImage { .. } => "UNKNOWN_IMAGE",
            Error::UnknownCategory { .. } => "UNKNOWN_CATEGORY",
            Error::CategoryConflict { .. } => "CATEGORY_CONFLICT",
            Error::DarkenRange(_) => "DARKEN_RANGE",
            Error::Image { .. } => "IMAGE",
            Error::Io { .. } => "IO",
            Error::Config(_) => "CONFIG",
            Error::RetryExhausted(_) => "RETRY_EXHAUSTED",
            Error::GroupEmpty => "GROUP_EMPTY",
            Error::UnknownPlaceholder(_) => "UNKNOWN_PLACEHOLDER",
            Error::NoValidRuns(_) => "NO_VALID_RUNS",
            Error::Command(_) => "COMMAND",
        }
    }
}
