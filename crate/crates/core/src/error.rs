use thiserror::Error;

/// Errors raised by the numerical routines of the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix has eigenvalue {eigenvalue:e} below the clamp threshold {threshold:e}")]
    NegativeEigenvalue { eigenvalue: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank {rank} out of range 1..={dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("covariance is not the identity")]
    NonIdentityCovariance,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sample sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("operation requires one-dimensional data, found d = {0}")]
    DimensionNot1D(usize),

    #[error("alphabet sizes differ: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("admissibility premise violated: {0}")]
    CertificateViolated(String),

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("invalid parameter a = {0}; requires a > 1")]
    InvalidA(f64),

    #[error("not enough samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("degenerate regression grid: {0}")]
    DegenerateGrid(String),

    #[error("fitted exponent {0} is not negative; the law does not decrease in n")]
    NonDecreasingFit(f64),

    #[error("matrix A is singular off the boundary structure (smallest eigenvalue {0:e})")]
    SingularA(f64),

    #[error("state norm {norm:e} exceeded the blow-up guard at t = {t}")]
    StepBlowup { norm: f64, t: f64 },

    #[error("initial direction is orthogonal to the top eigenvector (|<v, v1>| = {0:e})")]
    BadInit(f64),

    #[error("direction is orthogonal to the top eigenvector")]
    OrthogonalV,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cell {cell} failed: {source}")]
    CellFailed { cell: String, source: Box<LabError> },
}

pub type Result<T> = std::result::Result<T, LabError>;
