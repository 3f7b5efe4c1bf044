use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("transition ({0},{1}) is not allowed by the drive")]
    ForbiddenTransition(usize, usize),
    #[error("quadrature did not converge (last relative change {0:e})")]
    Quadrature(f64),
    #[error("fit did not converge: {0}")]
    FitFailed(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
