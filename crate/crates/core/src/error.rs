use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("session failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("session {session_id} is unscorable: {reason}")]
    Unscorable { session_id: String, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: String },

    #[error("arity mismatch: model expects {expected} features, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty cohort")]
    EmptyCohort,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
