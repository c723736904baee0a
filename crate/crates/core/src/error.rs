use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("generating function has a pole near u = {0}")]
    Pole(f64),

    #[error("the bulk density is degenerate at zero field")]
    DegenerateBulk,

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("eigenvalues collide (separation {0:e})")]
    Collision(f64),

    #[error("{excluded} of {total} realizations excluded (limit 1%)")]
    TooManyExclusions { excluded: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("x grids differ: {0}")]
    GridMismatch(String),

    #[error("malformed result file: {0}")]
    Format(String),

    #[error("resume mismatch: {0}")]
    ResumeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::LinAlg(e.to_string())
    }
}
