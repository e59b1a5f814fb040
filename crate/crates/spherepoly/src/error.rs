use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent vectors of length {found}, polynomial ring has complex dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("polynomial is not bihomogeneous of equal bidegree (k, k)")]
    NotBihomogeneous,
    #[error("complex dimension {found} below the required minimum {min}")]
    DimensionTooSmall { found: usize, min: usize },
    #[error("expected a real polynomial of bidegree (1, 1)")]
    WrongDegree,
    #[error(transparent)]
    Model(#[from] einflow_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
