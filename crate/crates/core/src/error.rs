//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("candidate id {id} out of range for m = {m}")]
    CandidateOutOfRange { id: usize, m: usize },

    #[error("rank {rank} out of range [{lo}, {hi}]")]
    RankOutOfRange { rank: usize, lo: usize, hi: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("privacy budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("selection domain is empty")]
    EmptyDomain,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
