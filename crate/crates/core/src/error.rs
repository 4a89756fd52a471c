use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid annotations:\n  {}", .0.join("\n  "))]
    InvalidAnnotations(Vec<String>),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("image file not found: {}", .0.display())]
    MissingImage(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown image format (magic bytes {0:02x?})")]
    UnknownImageFormat(Vec<u8>),

    #[error("truncated image header: {0}")]
    TruncatedHeader(&'static str),

    #[error("dimension manifest: {0}")]
    Manifest(String),

    #[error("image {0} has unresolved pixel dimensions")]
    UnresolvedDimensions(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("region of interest does not intersect the grid")]
    RoiOutsideGrid,

    #[error("augmentation plan does not match dataset: {0}")]
    PlanMismatch(String),

    #[error("predictions line {line}: {message}")]
    Prediction { line: usize, message: String },

    #[error("predictions reference images missing from the dataset: {}", .0.join(", "))]
    UnknownImages(Vec<String>),

    #[error("training log row {row}: {message}")]
    TrainingLog { row: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
