//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by constructors, oracles, and estimators.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A factor shape was requested outside the supported dense envelope.
    #[error("unsupported shape: local dimension {local_dim}, {factors} factors (total dimension {total} exceeds {max})")]
    ShapeTooLarge {
        local_dim: usize,
        factors: usize,
        total: usize,
        max: usize,
    },

    /// A shape parameter was degenerate (zero local dimension or zero factors).
    #[error("degenerate shape: local dimension {local_dim}, {factors} factors")]
    DegenerateShape { local_dim: usize, factors: usize },

    /// Two operands live on different spaces.
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    /// A matrix did not satisfy a structural requirement (dimensions, Hermiticity).
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    /// A candidate density matrix failed its invariants.
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    /// A scalar parameter was out of its documented range.
    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// An operation that requires an exact support oracle received a
    /// lower-bound oracle.
    #[error("operation requires an exact oracle but `{oracle}` only certifies a lower bound")]
    NotExact { oracle: String },

    /// Net construction could not validate its covering radius.
    #[error("net validation failed: empirical covering radius {observed} exceeds delta {delta}")]
    CoveringValidation { observed: f64, delta: f64 },

    /// An I/O or serialization failure while reading or writing artifacts.
    #[error("serialization: {0}")]
    Serialization(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
