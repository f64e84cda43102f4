use thiserror::Error;

use crate::solvers::IterTrace;

pub type Result<T> = std::result::Result<T, CdareError>;

#[derive(Debug, Error)]
pub enum CdareError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is numerically singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("{0} is not Hermitian")]
    NotHermitian(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),

    #[error("spectral radius {rho} of conj(A)*A is not below 1")]
    SpectralRadiusTooLarge { rho: f64 },

    #[error("iteration is not well posed at step {k}: {reason}")]
    NotWellPosed {
        k: usize,
        reason: String,
        trace: Box<IterTrace>,
    },

    #[error("coefficient matrix A is singular; the negative definite solution does not exist")]
    SingularA,

    #[error("candidate solution failed validation (residual {res:e})")]
    ValidationFailed { res: f64 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("trace has too few usable steps to estimate a rate")]
    InsufficientTrace,

    #[error("no admissible problem after {attempts} attempts")]
    RetryExhausted { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
