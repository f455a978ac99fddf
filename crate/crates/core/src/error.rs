use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no features")]
    NoFeatures,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("graph has no edges")]
    NoEdges,

    #[error("gamma must be non-negative, got {0}")]
    NegativeGamma(f64),

    #[error("pairwise table is not submodular for labels ({a}, {b}) with expansion label {alpha}")]
    NotSubmodular { a: usize, b: usize, alpha: usize },

    #[error("palette size {k} exceeds previous level's palette size {prev}")]
    PaletteGrowth { k: usize, prev: usize },

    #[error("{count} regions do not fit a 16-bit PNG label map; write CSV instead")]
    TooManyRegionsForPng { count: usize },

    #[error("{format} decode error in {path}: {message}")]
    Decode {
        format: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
