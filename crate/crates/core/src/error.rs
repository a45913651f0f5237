use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::Role;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header does not match schema: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column '{column}': missing value")]
    MissingCell { row: usize, column: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("microdata is empty")]
    Empty,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no attributes with role {0}")]
    RoleAbsent(Role),

    #[error("column '{0}' is constant")]
    ConstantColumn(String),

    #[error("invalid k={k} for {n} records; k must lie in [1, {n}]")]
    InvalidK { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid cluster range [{min}, {max}] for {n} records")]
    InvalidRange { min: usize, max: usize, n: usize },

    #[error("degenerate cluster model: {0}")]
    Degenerate(String),

    #[error(
        "{scope}: confidential class {class} has {size} members, fewer than k={k}; \
         the largest feasible k is {max_feasible_k}"
    )]
    ClassTooSmall {
        scope: String,
        class: usize,
        size: usize,
        k: usize,
        max_feasible_k: usize,
    },

    #[error("need at least 2k={} records, have {n}; k can be at most {}", 2 * .k, .n / 2)]
    InsufficientRecords { n: usize, k: usize },

    #[error("invalid partition: {0}")]
    Partition(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of an anonymization method on otherwise valid data.
    pub fn is_method_failure(&self) -> bool {
        matches!(
            self,
            Error::InvalidK { .. }
                | Error::InvalidParam(_)
                | Error::InvalidRange { .. }
                | Error::Degenerate(_)
                | Error::ClassTooSmall { .. }
                | Error::InsufficientRecords { .. }
                | Error::Partition(_)
        )
    }
}
