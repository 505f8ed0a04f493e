use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no data rows after the header")]
    EmptyInput { path: PathBuf },

    #[error("{path}: {malformed} of {total} rows are malformed (wrong format or encoding?)")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("unknown concept id {0}")]
    InvalidConcept(usize),

    #[error("concept {ancestor} is not an ancestor of concept {node}")]
    NotAncestor { node: usize, ancestor: usize },

    #[error("item {0} has no concept in the taxonomy")]
    UnmappedItem(usize),

    #[error("matrix has {matrix} items but taxonomy maps {taxonomy}")]
    IndexSpaceMismatch { matrix: usize, taxonomy: usize },

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("user row {0} has no observed ratings")]
    NoObservedRatings(usize),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("prediction and actual lengths differ ({pred} vs {actual}) or are empty")]
    LengthMismatch { pred: usize, actual: usize },

    #[error("{entries} observed entries cannot fill {folds} folds")]
    TooFewEntries { entries: usize, folds: usize },

    #[error("malformed taxonomy document: {0}")]
    Taxonomy(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
