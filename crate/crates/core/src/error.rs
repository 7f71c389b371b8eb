//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("division by zero in Q(t)")]
    DivisionByZero,

    #[error("specialization hits a pole at t = {0}")]
    PoleAtSpecialization(String),

    #[error("coefficient at exponent {wanted} is outside the guaranteed window [{lo}, {hi}]")]
    WindowExceeded { wanted: i64, lo: i64, hi: i64 },

    #[error("series truncation depth {depth} cannot support the requested computation: {what}")]
    DepthExceeded { depth: u32, what: String },

    #[error("unknown variable {0}")]
    UnknownVariable(String),

    #[error("point assignment violates the chamber order: {0}")]
    ChamberViolation(String),

    #[error("variant construction rejected: {0}")]
    VariantRejected(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("inconsistency detected: {0}")]
    Inconsistent(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
