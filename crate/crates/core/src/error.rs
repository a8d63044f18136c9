use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text contains no passages")]
    NoPassages,

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid embedding file at line {line}: {reason}")]
    EmbeddingFormat { line: usize, reason: String },

    #[error("query `{0}` has no terms")]
    EmptyQuery(String),

    #[error("document `{id}` has {terms} terms, cap is {cap}")]
    LengthCapExceeded {
        id: String,
        terms: usize,
        cap: usize,
    },

    #[error("query term `{0}` has zero collection probability")]
    ZeroCollectionProbability(String),

    #[error("at least {needed} documents are required, got {got}")]
    TooFewDocuments { needed: usize, got: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("document `{0}` is not in the current ranking")]
    UnknownDocument(String),

    #[error("document `{0}` is ranked first; nothing to mimic")]
    NothingToMimic(String),

    #[error("ranking history is empty")]
    EmptyHistory,

    #[error("no candidate passage pairs")]
    NoCandidates,

    #[error("invalid passage pair: {0}")]
    InvalidPair(String),

    #[error("rank out of range: {rank} not in 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },

    #[error("stored ranking for `{query_id}` disagrees with the engine: stored {stored:?}, recomputed {recomputed:?}")]
    RankingMismatch {
        query_id: String,
        stored: Vec<String>,
        recomputed: Vec<String>,
    },

    #[error("training data has no orderable pairs")]
    NoOrderablePairs,

    #[error("{groups} groups cannot be split into {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("paired samples differ in length: {0} vs {1}")]
    UnpairedSamples(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad caller input, as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
