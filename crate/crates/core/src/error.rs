use thiserror::Error;

/// Errors raised by every operation in the crate.
///
/// The split between validation and budget failures is load-bearing: the CLI
/// maps them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain size mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("sample is empty")]
    EmptySample,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid hypothesis class: {0}")]
    InvalidClass(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("too large for exact computation: {0}")]
    Budget(String),

    #[error("noise detected: atom {atom} carries both labels")]
    LabelConflict { atom: usize },

    #[error("rate degenerate (nonpositive mean excess): {0}")]
    DegenerateRate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget(_))
    }

    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
