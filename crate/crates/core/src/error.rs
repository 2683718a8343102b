use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in input vector")]
    NonFinite,

    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("loss family `{0}` is not a function of a_j^T x alone")]
    NotSeparable(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("all component curvatures vanish at this point; non-uniform distribution undefined")]
    DegenerateCurvature,

    #[error("dense reference refused: dimension {d} exceeds cap {cap}")]
    DenseCapExceeded { d: usize, cap: usize },

    #[error("secular equation root finder failed to bracket (lo = {lo}, hi = {hi})")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
