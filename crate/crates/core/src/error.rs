use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bounding box out of bounds: {coordinate} = {value} exceeds limit {limit}")]
    OutOfBounds {
        coordinate: &'static str,
        value: u32,
        limit: u32,
    },

    #[error("invalid bounding box ({x0}, {y0}, {x1}, {y1}): need x0 < x1 and y0 < y1")]
    InvalidBBox { x0: u32, y0: u32, x1: u32, y1: u32 },

    #[error("image {width}x{height} is smaller than patch size {size}")]
    TooSmall { width: u32, height: u32, size: u32 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("PGM decode error: {0}")]
    Pgm(String),

    #[error("image decode error: {0}")]
    Decode(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank deficient data: {0}")]
    Rank(String),

    #[error("both classes must be present: {0}")]
    SingleClass(String),

    #[error("class {class:?} has {available} annotations, {needed} required")]
    InsufficientClass {
        class: String,
        needed: usize,
        available: usize,
    },

    #[error("no data on the {0} side of the separating plane")]
    MissingSide(String),

    #[error("separating plane has zero normal")]
    ZeroNormal,

    #[error("virtual point for {class:?} does not fall on its declared side (decision {decision})")]
    WrongSide { class: String, decision: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cache corrupted: {0}")]
    Cache(String),

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
}
