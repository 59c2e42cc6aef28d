use thiserror::Error;

/// Errors produced by the selection, diagnostics and ingestion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("model validation failed ({invariant}): {detail}")]
    ModelValidation { invariant: &'static str, detail: String },

    #[error("target is fully explained by the conditioning set")]
    TargetExplained,

    #[error("enumeration over n={n}, k={k} needs {count} evaluations, above the cap of {cap}")]
    Budget { n: usize, k: usize, count: u128, cap: u64 },

    #[error("unknown column or target `{0}`")]
    UnknownName(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
