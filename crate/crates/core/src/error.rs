use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty realization batch")]
    EmptyBatch,
    #[error("singular direction: quadratic form {value:e} at column {column}, covariance {index} is below the floor {floor:e}")]
    SingularDirection {
        index: usize,
        column: usize,
        value: f64,
        floor: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("majorization undefined: sums differ ({0} vs {1})")]
    MajorizationUndefined(f64, f64),
    #[error("zero covariance at index {0}")]
    ZeroCovariance(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
