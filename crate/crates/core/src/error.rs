use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed record: {0}")]
    Parse(String),
    #[error("unknown news field `{0}` (expected `type` or `category`)")]
    UnknownField(String),
    #[error("unknown feature set `{0}`")]
    UnknownFeatureSet(String),
    #[error("no embedding for news item `{0}`")]
    MissingEmbedding(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("user `{0}` has no usable history")]
    EmptyHistory(String),
    #[error("AUC undefined with {positives} positives and {negatives} negatives")]
    UndefinedAuc { positives: usize, negatives: usize },
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("empty training pool")]
    EmptyPool,
}

impl Error {
    /// True for failures caused by arithmetic rather than by input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::DimensionMismatch { .. } | Error::Precondition(_)
        )
    }
}
