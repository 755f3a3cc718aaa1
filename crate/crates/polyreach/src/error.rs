use thiserror::Error;

/// Errors produced by set operations, dynamics handling and the reachability engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("invalid exponent at byte {position}: {message}")]
    InvalidExponent { position: usize, message: String },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("factor value {value} outside [-1,1] at index {index}")]
    FactorOutOfRange { index: usize, value: f64 },

    #[error("factor vector has length {got}, expected {expected}")]
    FactorLengthMismatch { got: usize, expected: usize },

    #[error("identifier mismatch: {0}")]
    IdMismatch(String),

    #[error("set is not affine with an invertible dependent generator block: {0}")]
    NotAffine(String),

    #[error("point lies outside the set: {0}")]
    OutsideSet(String),

    #[error("matrix exponential truncation diverges: |A|*r/(eta+2) = {epsilon} >= 1; raise eta or shrink the step size")]
    TruncationDiverged { epsilon: f64 },

    #[error("abstraction error fixed point not reached within {max_iters} iterations at step {step}; shrink the step size")]
    AbstractionDiverged { step: usize, max_iters: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

pub type Result<T> = std::result::Result<T, Error>;
