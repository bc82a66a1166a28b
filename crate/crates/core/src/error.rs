use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image: {0}")]
    Format(String),

    #[error("empty-region: the requested region does not intersect the image")]
    EmptyRegion,

    #[error(
        "flat-region: the selected pixels show no brightness variation; \
         select a region of one material that crosses a shadow boundary"
    )]
    FlatRegion,

    #[error("region has {count} pixels, at least {min} are required")]
    TooFewPixels { count: usize, min: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid epsilon: channel {channel} is {value}, every component must be finite and < 1")]
    InvalidEpsilon { channel: usize, value: f64 },

    #[error("spectral grid mismatch")]
    GridMismatch,

    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("degenerate line bundle: line directions are (nearly) parallel")]
    DegenerateBundle,

    #[error("degenerate k: requested {k} clusters but only {distinct} distinct feature vectors exist")]
    DegenerateK { k: usize, distinct: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used in JSON error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::EmptyRegion => "empty-region",
            Error::FlatRegion => "flat-region",
            Error::TooFewPixels { .. } => "too-few-pixels",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidEpsilon { .. } => "invalid-epsilon",
            Error::GridMismatch => "grid-mismatch",
            Error::OutOfRange { .. } => "out-of-range",
            Error::Scene(_) => "invalid-scene",
            Error::DegenerateBundle => "degenerate-bundle",
            Error::DegenerateK { .. } => "degenerate-k",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
