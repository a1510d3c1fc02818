use thiserror::Error;

use crate::compiler::{Conflict, Diagnostic};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a permutation of {{1,2,3,4}}: {0:?}")]
    InvalidPermutation(Vec<u8>),
    #[error("label {0} is outside {{1,2,3,4}}")]
    InvalidLabel(i64),
    #[error("strength value {0} is outside [-255, 255]")]
    StrengthRange(i64),
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("core capacity exceeded: {0}")]
    Capacity(String),
    #[error("core constraints violated: {} issue(s)", .0.len())]
    Constraints(Vec<Diagnostic>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("at least one strength function choice is required")]
    EmptyChoices,
    #[error("estimation refused: {0}")]
    Refused(String),
    #[error("not a symmetric kernel: {reason}")]
    NotRepresentable { reason: String, conflict: Option<Conflict> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Json(_) | Error::Io(_) => 3,
            Error::NotRepresentable { .. } => 5,
            _ => 4,
        }
    }

    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPermutation(_) => "invalid-permutation",
            Error::InvalidLabel(_) => "invalid-label",
            Error::StrengthRange(_) => "strength-range",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Dimension(_) => "dimension",
            Error::Capacity(_) => "capacity",
            Error::Constraints(_) => "constraint",
            Error::Config(_) => "config",
            Error::EmptyChoices => "empty-choices",
            Error::Refused(_) => "refused",
            Error::NotRepresentable { .. } => "not-representable",
            Error::Parse(_) | Error::Json(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
