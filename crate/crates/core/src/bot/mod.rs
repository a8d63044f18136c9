//! The content-modification bot.
//!
//! Given the rankings observed so far for a query, the bot replaces one
//! passage of its document with a passage taken from a document ranked above
//! it. Candidate `(source, target)` pairs are described by fifteen features
//! and scored with a linear model; the best-scoring pair is applied.
//!
//! The bot never sees the engine's ranking function, only [`RankingHistory`].

mod features;
mod history;
mod model;
mod modify;

pub(crate) use features::context_indices;
pub use features::{
    compute_past_centroid, compute_top_centroids, extract_pair_features, time_decay_weights,
    FeatureContext, PairFeatures, PAIR_FEATURE_COUNT, PAIR_FEATURE_NAMES,
};
pub use history::{build_candidate_pool, HistoryRecord, PoolPassage, RankingHistory};
pub(crate) use model::preference_order;
pub use model::{
    min_max_normalize, score_and_select, FeatureBounds, FeatureRow, PairModel, Selection,
};
pub use modify::{
    apply_replacement, modify_document, CandidateAudit, DecisionAudit, Modification, Outcome,
};

use serde::{Deserialize, Serialize};

use crate::engine::DEFAULT_TERM_CAP;

/// A replacement candidate: passage `src_index` of the current document is
/// replaced by passage `target_index` of `target_doc_id`, which sits at
/// `target_rank` in the current ranking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassagePair {
    pub src_index: usize,
    pub target_doc_id: String,
    pub target_rank: usize,
    pub target_index: usize,
}

impl PassagePair {
    /// Tie-break order: source index, then target rank, then target position.
    pub fn order_key(&self) -> (usize, usize, usize) {
        (self.src_index, self.target_rank, self.target_index)
    }
}

/// How `QryTermSrc` / `QryTermTarget` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryTermMode {
    /// Query-term occurrences divided by passage length.
    #[default]
    OccurrenceFraction,
    /// Fraction of the distinct query terms present in the passage.
    DistinctCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotConfig {
    /// Maximum number of documents in the current-ranking centroid.
    pub m_max: usize,
    /// Decay rate of the past-rankings centroid.
    pub alpha: f64,
    pub query_term_mode: QueryTermMode,
    pub term_cap: usize,
}

impl Default for BotConfig {
    fn default() -> Self {
        BotConfig {
            m_max: 3,
            alpha: 0.01,
            query_term_mode: QueryTermMode::default(),
            term_cap: DEFAULT_TERM_CAP,
        }
    }
}
