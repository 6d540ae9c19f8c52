use thiserror::Error;

/// Errors raised by constructors and operations in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("permutation is not an involution")]
    NotInvolution,

    #[error("{what}: size {n} exceeds the limit of {limit}{hint}")]
    TooLarge { what: &'static str, n: usize, limit: usize, hint: &'static str },

    #[error("matrix is not bistochastic: {0}")]
    NotBistochastic(String),

    #[error("matrix is not unitary: {0}")]
    NotUnitary(String),

    #[error("invalid stationary system: {0}")]
    InvalidSystem(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid Bloch vector: {0}")]
    InvalidBloch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
