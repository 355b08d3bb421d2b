use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("response column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric or non-finite value `{value}` at row {row}, column `{column}`")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("constant column {0}")]
    ConstantColumn(usize),
    #[error("dataset must be standardized first")]
    NotStandardized,
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rank-deficient block submatrix (smallest singular value {smallest_singular:.3e})")]
    RankDeficient { smallest_singular: f64 },
    #[error("variable {0} lies numerically in the span of its block")]
    DegenerateResidual(usize),
    #[error("response has zero norm")]
    ZeroResponse,
    #[error("singular system: {0}")]
    Singular(String),
    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("resample {0} kept producing a constant column after 10 retries")]
    ResampleExhausted(usize),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
