use thiserror::Error;

/// Errors raised by the sphere, sampling and testing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cannot project the zero vector onto the sphere")]
    ZeroVector,

    #[error("row {row} is the zero vector and cannot be projected onto the sphere")]
    ZeroRow { row: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector norm {norm} is too far from 1 to be re-normalized")]
    NotUnit { norm: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailure(String),

    #[error("beta law with mean e1 = {e1} and variance 1/{p} does not exist")]
    InfeasibleMoments { e1: f64, p: usize },

    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
