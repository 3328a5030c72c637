use thiserror::Error;

/// Errors raised by the matching engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed parse (sentence block starting at line {line}): {reason}")]
    MalformedParse { line: usize, reason: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("parse `{0}` does not refer to an ingested sentence")]
    DanglingParse(String),

    #[error("bad vector file (line {line}): {reason}")]
    BadVectorFile { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("illegal edit: {0}")]
    IllegalEdit(String),

    #[error("training data contains a single class")]
    DegenerateLabels,

    #[error("bad evaluation instance: {0}")]
    BadInstance(String),

    #[error("unknown label `{0}`")]
    BadLabel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing resource: {0}")]
    MissingResource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
