use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NotSquare { rows: usize, cols: usize },

    #[error("row labels do not match column labels (first mismatch at position {position}: {row:?} vs {col:?})")]
    LabelMismatch {
        position: usize,
        row: String,
        col: String,
    },

    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),

    #[error("cannot parse cell {cell:?} at row {row}, column {col}")]
    BadCell { row: usize, col: usize, cell: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing covariate value: {0}")]
    MissingCovariate(String),

    #[error("node sets differ between time slices {first} and {second}")]
    NodesetMismatch { first: usize, second: usize },

    #[error("duplicate design column name {0:?}")]
    NameCollision(String),

    #[error("design is singular; collinear columns: {0:?}")]
    SingularDesign(Vec<String>),

    #[error("at least {needed} time points required, got {got}")]
    TooFewTimePoints { needed: usize, got: usize },

    #[error("observed cell ({row}, {col}) has value {value}, which is invalid for the {family} family")]
    InvalidOutcome {
        row: usize,
        col: usize,
        value: f64,
        family: &'static str,
    },

    #[error("row {row} has {nominations} nominations but odmax is {odmax}")]
    OdmaxExceeded {
        row: usize,
        nominations: usize,
        odmax: usize,
    },

    #[error("symmetric model requires a symmetric sociomatrix; cells ({0}, {1}) and ({1}, {0}) differ")]
    Asymmetric(usize, usize),

    #[error("rank {rank} exceeds node count {n}")]
    RankTooLarge { rank: usize, n: usize },

    #[error("empty truncation interval ({lower}, {upper})")]
    EmptyInterval { lower: f64, upper: f64 },

    #[error("{0}")]
    Degenerate(String),

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("dataset {name} unavailable: {path} not found (set AME_DATA_DIR or run scripts/export_amen_data.R)")]
    DatasetUnavailable { name: String, path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
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
