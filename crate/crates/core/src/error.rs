use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("trace {trace} outside the allowed range")]
    BadTrace { trace: f64 },
    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("Kraus operators do not satisfy the completeness relation (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("{qubits} qubits exceed the simulation cap of {cap}")]
    CapacityExceeded { qubits: usize, cap: usize },
    #[error("family is not weakly correlated (pair-average deviation {deviation:.3e})")]
    NotWeak { deviation: f64 },
    #[error("angle set is not closed under adding pi: {0}")]
    NotPiClosed(String),
    #[error("operator family is not complete on each angle pair (deviation {deviation:.3e})")]
    IncompleteFamily { deviation: f64 },
    #[error("resource asks for a retry: {0}")]
    Retry(String),
    #[error("retry budget of {0} exhausted")]
    RetriesExhausted(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
