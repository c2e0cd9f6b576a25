use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not a prime >= 3")]
    NotPrime(u64),
    #[error("primes must be pairwise distinct (repeated {0})")]
    RepeatedPrime(u32),
    #[error("prime {prime} does not exceed coefficient magnitude {coeff}")]
    PrimeTooSmall { prime: u32, coeff: u64 },
    #[error("modulus mismatch")]
    ModulusMismatch,
    #[error("element not invertible at coordinate {0}")]
    NotInvertible(usize),
    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("unsupported expression: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("prime window too small: {0}")]
    WindowExhausted(String),
    #[error("retries exhausted after {attempts} attempts: {detail}")]
    RetriesExhausted { attempts: u32, detail: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("certificate violated at {0}")]
    Violation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
