use thiserror::Error;

/// Errors produced anywhere in the imputation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("parse error at row {row}, column {column}: {value:?} is not numeric")]
    Parse { row: usize, column: String, value: String },

    #[error("column {column:?} has no observed entries")]
    FullyMissingColumn { column: String },

    #[error("column {column:?} has zero variance over its observed entries")]
    ZeroVariance { column: String },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("split produced an empty partition ({train} train / {test} test rows)")]
    EmptySplit { train: usize, test: usize },

    #[error("requested missing rate {requested} for feature {feature} is infeasible (achieved {achieved:.4})")]
    InfeasibleRate {
        feature: usize,
        requested: f64,
        achieved: f64,
    },

    #[error("no neighbour shares an observed coordinate with row {row} for column {column}")]
    NoNeighbor { row: usize, column: usize },

    #[error("no amputed cells to score")]
    NoMissingCells,

    #[error("singular system in {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch} in term {term}")]
    Diverged { epoch: usize, term: String },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Diverged { .. } | Error::Singular(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
