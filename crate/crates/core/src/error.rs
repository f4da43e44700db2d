use thiserror::Error;

/// Errors raised across the spectral pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("eigensolver did not converge")]
    ConvergenceFailure,

    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("argument must be nonzero")]
    ZeroArgument,

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("energy {re}+{im}i lies on or too close to the symbol curve")]
    OnCurve { re: f64, im: f64 },

    #[error("index set splits a numerically degenerate eigenvalue cluster")]
    DegenerateSplit,

    #[error("index set entry {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("spectrum of {0} is not simple in modulus")]
    NotSimpleSpectrum(&'static str),

    #[error("matrix is not a projection (idempotency defect {0:.3e})")]
    NotAProjection(f64),

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("iteration did not converge")]
    NoConvergence,

    #[error("matrix power overflowed")]
    Overflow,

    #[error("contour cannot separate the selected eigenvalues")]
    ContourSeparation,
}

pub type Result<T> = std::result::Result<T, Error>;
