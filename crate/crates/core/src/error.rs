use thiserror::Error;

/// Errors raised by the library. Configuration problems are reported at
/// construction time; sampling and evaluation routines never fail on inputs
/// that passed construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("measures live on different metric spaces")]
    SpaceMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty sequence")]
    EmptySequence,

    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("support too large for subset enumeration: {size} points (limit {limit})")]
    SupportTooLarge { size: usize, limit: usize },

    #[error(
        "codebook exceeds symbol budget: N1*N2*n = {n1}*{n2}*{n} = {symbols} > {budget}"
    )]
    CodebookBudget {
        n1: u64,
        n2: u64,
        n: usize,
        symbols: u128,
        budget: u128,
    },

    #[error("index rate log2(N1+1)/n = {rate:.6} bits exceeds C' - sigma' = {limit:.6} bits")]
    RateInadmissible { rate: f64, limit: f64 },

    #[error("guard `{guard}` violated: {detail}")]
    Guard { guard: &'static str, detail: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
