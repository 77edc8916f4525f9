use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the fitting routines, the synthetic generators and the
/// frame codecs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("every sample has zero norm after centering")]
    EmptyAfterNormalization,

    #[error("invalid rank: requested {requested}, allowed range is 1..={max}")]
    InvalidRank { requested: usize, max: usize },

    #[error("rank deficient: requested {requested} components, only {available} have nonzero eigenvalues")]
    RankDeficient { requested: usize, available: usize },

    #[error("angular threshold {0} is outside the open interval (0, pi/2)")]
    InvalidThreshold(f64),

    #[error("singular inner solve during EM iteration")]
    SingularStep,

    #[error("frame {name} is {got_width}x{got_height}, expected {width}x{height}")]
    MixedDimensions {
        name: String,
        width: usize,
        height: usize,
        got_width: usize,
        got_height: usize,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("no input frames")]
    EmptyInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model json: {0}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
