use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("state is not faithful (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
