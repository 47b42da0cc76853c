use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator size mismatch: {left} sites vs {right} sites")]
    SizeMismatch { left: usize, right: usize },

    #[error("unsupported number of sites {n_sites} (allowed {min}..={max})")]
    UnsupportedSize { n_sites: usize, min: usize, max: usize },

    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid Pauli label '{0}'")]
    InvalidLabel(String),

    #[error("operator is not Hermitian (max violating coefficient {violation:e})")]
    NotHermitian { violation: f64 },

    #[error("observable has a nonzero identity component ({0:e})")]
    NotTraceless(f64),

    /// The Krylov recurrence produced a (numerically) zero vector.
    #[error("Krylov space exhausted: zero vector cannot be normalized")]
    Termination,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty coefficient sequence")]
    EmptySequence,

    #[error("coefficient b_{index} = {value} is not positive and finite")]
    NonPositiveCoefficient { index: usize, value: f64 },

    #[error("no crossover detected: maximum at n = {argmax} with only {after} later coefficients")]
    NoCrossover { argmax: usize, after: usize },

    #[error("index {index} outside the available range (max {max})")]
    OutOfRange { index: usize, max: usize },

    #[error("bi-exponential fit did not converge (best residual {best_residual:e})")]
    FitFailed { best_residual: f64 },

    #[error("dense diagonalization capped at {cap} sites, requested {n_sites}")]
    DenseCapExceeded { n_sites: usize, cap: usize },

    #[error("tridiagonal eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("Krylov basis storage: {0}")]
    Storage(String),

    #[error("checksum mismatch in spilled Krylov chunk {0}")]
    Checksum(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}
