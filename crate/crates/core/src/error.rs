use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Boxed error returned by injected block executors and refiners.
pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: unsupported image layout ({detail}); expected 8-bit single channel")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("seed mask has no set pixels")]
    EmptySeeds,

    #[error("ground truth is degenerate (only one class present)")]
    DegenerateMask,

    #[error("evaluation region is empty")]
    EmptyRegion,

    #[error("widest boundary band covers the whole frame")]
    BandCoversFrame,

    #[error("mask has no foreground pixels")]
    EmptyForeground,

    #[error("mask has no boundary pixels")]
    NoBoundary,

    #[error("perturbation removed every foreground pixel")]
    DegenerateResult,

    #[error("perturbation budget of {iterations} steps exhausted at IoU {achieved_iou:.6}")]
    BudgetExhausted { iterations: usize, achieved_iou: f64 },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("refiner contract violated on patch ({x}, {y}, {w}x{h}): {detail}")]
    Refiner {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        detail: String,
    },

    #[error("block {block}: {source}")]
    Executor {
        block: String,
        #[source]
        source: BoxError,
    },

    #[error("no prediction stem matches a ground-truth stem")]
    EmptyPairing,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than the environment.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Executor { .. } | Error::Csv(_))
    }
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
