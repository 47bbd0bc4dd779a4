use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rating scale: {0}")]
    InvalidScale(String),

    #[error("rating label {0:?} is not part of the scale")]
    UnknownLabel(String),

    #[error("user {user:?} rated item {item:?} more than once")]
    DuplicatePair { user: String, item: String },

    #[error("no ratings")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Every group pair assigns zero probability to an observed rating.
    #[error("observed rating of user {user} on item {item} has zero probability under the model")]
    DegenerateSupport { user: usize, item: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("matrix factorization diverged at epoch {epoch} (objective {objective})")]
    Diverged { epoch: usize, objective: f64 },

    #[error("cannot split {n_ratings} ratings into {folds} folds")]
    InvalidSplit { n_ratings: usize, folds: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
