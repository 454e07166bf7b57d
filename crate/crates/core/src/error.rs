use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("record `{doc_id}`: field `{field}`: {reason}")]
    MalformedRecord {
        doc_id: String,
        field: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tensor `{tensor}` has {found} values, expected {expected}")]
    ShapeMismatch {
        tensor: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in tensor `{0}`")]
    NonFinite(&'static str),

    #[error("query has no entities")]
    EmptyQuery,

    #[error("document `{0}` has no entity mentions")]
    NoEntities(String),

    #[error("duplicate run entry for query `{query_id}`, document `{doc_id}`")]
    DuplicateRunEntry { query_id: String, doc_id: String },

    #[error("evaluation units differ: {0}")]
    UnitMismatch(String),

    #[error("development set has no salient entities")]
    NoDevLabels,

    #[error("no training pairs: {0}")]
    NoTrainingPairs(String),
}
