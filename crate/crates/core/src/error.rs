use std::fmt;

use thiserror::Error;

/// A single failed plausibility check on a [`crate::data::CbcRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.message.as_str()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {}", join_violations(.0))]
    InvalidRecord(Vec<Violation>),

    #[error("unclassifiable record: indices disagree (mcv {mcv}, mch {mch}, mchc {mchc}) and strict typing is enabled")]
    Unclassifiable { mcv: f64, mch: f64, mchc: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("row {row}: unknown label `{token}`")]
    UnknownLabel { row: usize, token: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("model file version {found} is not supported (this build reads major version {supported})")]
    UnsupportedVersion { found: String, supported: u32 },

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::UnknownFamily(_) | Error::Contract(_) => ErrorClass::Usage,
            Error::NonFiniteLoss { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
