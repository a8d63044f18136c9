use serde::{Deserialize, Serialize};

use super::features::{FeatureContext, PairFeatures};
use super::history::{PoolPassage, RankingHistory};
use super::model::{preference_order, PairModel};
use super::{BotConfig, PassagePair};
use crate::engine::{Document, Query};
use crate::error::{Error, Result};
use crate::text::{CorpusStats, EmbeddingStore};

/// Replaces passage `pair.src_index` of `d_cur` with the pool passage named
/// by `pair`. The result gets a new id and keeps the author.
pub fn apply_replacement(
    d_cur: &Document,
    pair: &PassagePair,
    pool: &[PoolPassage],
    term_cap: usize,
) -> Result<Document> {
    if pair.src_index >= d_cur.passages().len() {
        return Err(Error::InvalidPair(format!(
            "source index {} out of range for `{}`",
            pair.src_index,
            d_cur.id()
        )));
    }
    let target = pool
        .iter()
        .find(|p| p.doc_id == pair.target_doc_id && p.index == pair.target_index)
        .ok_or_else(|| {
            Error::InvalidPair(format!(
                "{}#{} is not in the pool",
                pair.target_doc_id, pair.target_index
            ))
        })?;
    let mut passages = d_cur.passages().to_vec();
    passages[pair.src_index] = target.text.clone();
    let id = format!(
        "{}~{}<{}#{}",
        d_cur.id(),
        pair.src_index,
        pair.target_doc_id,
        pair.target_index
    );
    Document::from_passages(id, d_cur.author_id(), passages, term_cap)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Modified,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAudit {
    pub pair: PassagePair,
    pub source_text: String,
    pub target_text: String,
    pub raw: PairFeatures,
    pub normalized: PairFeatures,
    pub score: f64,
}

/// What the bot saw and decided for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionAudit {
    pub query_id: String,
    pub doc_id: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen: Option<usize>,
    /// Candidates skipped because the swap overflowed the term cap.
    pub skipped_over_cap: Vec<usize>,
    pub candidates: Vec<CandidateAudit>,
}

#[derive(Debug, Clone)]
pub struct Modification {
    pub document: Document,
    pub audit: DecisionAudit,
}

impl Modification {
    pub fn changed(&self) -> bool {
        self.audit.outcome == Outcome::Modified
    }

    fn unchanged(
        query_id: &str,
        d_cur: &Document,
        reason: impl Into<String>,
        candidates: Vec<CandidateAudit>,
    ) -> Self {
        Modification {
            document: d_cur.clone(),
            audit: DecisionAudit {
                query_id: query_id.to_string(),
                doc_id: d_cur.id().to_string(),
                outcome: Outcome::Unchanged,
                reason: Some(reason.into()),
                chosen: None,
                skipped_over_cap: Vec::new(),
                candidates,
            },
        }
    }
}

/// Single-shot modification of `d_cur_id`: pool, features, normalization,
/// scoring, replacement. Falls back to the next-best pair when a swap would
/// exceed the term cap. A rank-1 document or an empty pool comes back
/// unchanged.
pub fn modify_document(
    d_cur_id: &str,
    query: &Query,
    history: &RankingHistory,
    model: &PairModel,
    stats: &CorpusStats,
    store: &EmbeddingStore,
    config: &BotConfig,
) -> Result<Modification> {
    let d_cur = history.document(d_cur_id)?;
    let current = history.current()?;
    match current.rank_of(d_cur_id) {
        None => return Err(Error::UnknownDocument(d_cur_id.to_string())),
        Some(1) => {
            return Ok(Modification::unchanged(
                &query.id,
                d_cur,
                "ranked first",
                Vec::new(),
            ))
        }
        Some(_) => {}
    }
    let ctx = FeatureContext::new(d_cur_id, query, history, stats, store, config)?;
    if ctx.pool().is_empty() {
        return Ok(Modification::unchanged(
            &query.id,
            d_cur,
            "empty candidate pool",
            Vec::new(),
        ));
    }

    let pairs = ctx.pairs();
    let raw = ctx.all_features();
    let normalized: Vec<_> = raw.iter().map(|f| model.normalize(&f.0)).collect();
    let scores: Vec<f64> = normalized.iter().map(|x| model.score(x)).collect();

    let candidates: Vec<CandidateAudit> = pairs
        .iter()
        .zip(&raw)
        .zip(normalized.iter().zip(&scores))
        .map(|((pair, raw), (norm, &score))| {
            let pool_idx = ctx.pool_index(pair).unwrap_or_default();
            CandidateAudit {
                pair: pair.clone(),
                source_text: d_cur.passages()[pair.src_index].clone(),
                target_text: ctx.pool()[pool_idx].text.clone(),
                raw: *raw,
                normalized: PairFeatures(*norm),
                score,
            }
        })
        .collect();

    let mut skipped = Vec::new();
    for idx in preference_order(&scores, &pairs, model.tie_tolerance(&normalized)) {
        match apply_replacement(d_cur, &pairs[idx], ctx.pool(), config.term_cap) {
            Ok(document) => {
                return Ok(Modification {
                    document,
                    audit: DecisionAudit {
                        query_id: query.id.clone(),
                        doc_id: d_cur_id.to_string(),
                        outcome: Outcome::Modified,
                        reason: None,
                        chosen: Some(idx),
                        skipped_over_cap: skipped,
                        candidates,
                    },
                })
            }
            Err(Error::LengthCapExceeded { .. }) => skipped.push(idx),
            Err(e) => return Err(e),
        }
    }
    let mut m = Modification::unchanged(
        &query.id,
        d_cur,
        "every candidate exceeds the length cap",
        candidates,
    );
    m.audit.skipped_over_cap = skipped;
    Ok(m)
}
