use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("payload size mismatch: expected {expected} bytes, found {actual}")]
    PayloadSize { expected: usize, actual: usize },

    #[error("unsupported element type: {0}")]
    UnsupportedElementType(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("index ({0}, {1}, {2}) out of bounds")]
    OutOfBounds(i64, i64, i64),

    #[error("degenerate VOI: {0}")]
    DegenerateVoi(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("seed not in air: intensity {value} HU above start threshold {threshold} HU")]
    SeedNotInAir { value: f64, threshold: f64 },

    #[error("seed likely outside body: region at start threshold touches {faces} volume faces")]
    SeedOutsideBody { faces: usize },

    #[error("empty mask")]
    EmptyMask,

    #[error("insufficient extent: {0}")]
    InsufficientExtent(String),

    #[error("unresolvable generation {generation}: radius {radius_mm} mm is below one voxel ({pitch_mm} mm)")]
    UnresolvableGeneration {
        generation: usize,
        radius_mm: f64,
        pitch_mm: f64,
    },

    #[error("non-finite value in input field")]
    NonFinite,

    #[error("point too close to the field boundary for the smallest circle")]
    TooCloseToBoundary,

    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),

    #[error("bad value for config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
