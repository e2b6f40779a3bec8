use std::path::PathBuf;

use thiserror::Error;

/// Failure modes shared by every pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("singular transform (|det| = {det:e})")]
    Singular { det: f64 },
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
    #[error("missing structure `{0}`")]
    MissingStructure(String),
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("empty mask")]
    EmptyMask,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("empty raster: both polygons rasterize to zero pixels")]
    EmptyRaster,
    #[error("alpha {alpha} too large: {reason}")]
    AlphaTooLarge { alpha: f64, reason: String },
    #[error("structure `{0}` has fewer than 3 landmarks")]
    UnsupportedStructure(String),
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("too few samples: {got} non-zero differences, need at least {needed}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("reference subject {0} not found in cohort")]
    ReferenceNotFound(String),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
