use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("triangular matrix is singular (zero diagonal at index {index})")]
    SingularTriangular { index: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite")]
    NotPsd,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no tone of the grid falls inside any band")]
    EmptyBand,

    #[error("binder model is degenerate: {0}")]
    ModelDegenerate(String),

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("mask is not positive on active tone {tone} of line {line}")]
    InfeasibleMask { line: usize, tone: usize },

    #[error("channel matrix is singular at tone {tone}")]
    SingularChannel { tone: usize },

    #[error("channel matrix is rank deficient at tone {tone}")]
    RankDeficient { tone: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
