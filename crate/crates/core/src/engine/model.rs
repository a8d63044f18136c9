use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{extract_doc_features, term_counts, DOC_FEATURE_NAMES};
use super::{Document, Query, Ranking};
use crate::error::{Error, Result};
use crate::text::CorpusStats;

pub const DEFAULT_MU: f64 = 1000.0;

/// Scores documents for a query. Higher is better.
pub trait RankingFunction {
    fn score(&self, doc: &Document, query: &Query, stats: &CorpusStats) -> Result<f64>;
}

/// The engine's ranking function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineModel {
    /// Weighted sum of document features.
    Linear { weights: BTreeMap<String, f64> },
    /// Query likelihood with Dirichlet-smoothed document models.
    LmDirichlet {
        #[serde(default = "default_mu")]
        mu: f64,
    },
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

impl Default for EngineModel {
    fn default() -> Self {
        EngineModel::LmDirichlet { mu: DEFAULT_MU }
    }
}

impl EngineModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            EngineModel::Linear { weights } => {
                if weights.is_empty() {
                    return Err(Error::Model("linear engine model has no weights".into()));
                }
                for (name, w) in weights {
                    if !DOC_FEATURE_NAMES.contains(&name.as_str()) {
                        return Err(Error::Model(format!("unknown document feature `{name}`")));
                    }
                    if !w.is_finite() {
                        return Err(Error::Model(format!("weight for `{name}` is not finite")));
                    }
                }
                Ok(())
            }
            EngineModel::LmDirichlet { mu } => {
                if !(mu.is_finite() && *mu > 0.0) {
                    return Err(Error::Model(format!("mu must be positive, got {mu}")));
                }
                Ok(())
            }
        }
    }
}

impl RankingFunction for EngineModel {
    fn score(&self, doc: &Document, query: &Query, stats: &CorpusStats) -> Result<f64> {
        match self {
            EngineModel::LmDirichlet { mu } => lm_dirichlet_score(doc, query, stats, *mu),
            EngineModel::Linear { weights } => {
                let f = extract_doc_features(doc, query, stats)?;
                weights
                    .iter()
                    .map(|(name, w)| {
                        f.get(name).map(|x| w * x).ok_or_else(|| {
                            Error::Model(format!("unknown document feature `{name}`"))
                        })
                    })
                    .sum()
            }
        }
    }
}

/// `Σ_{t∈q} ln((tf(t,d) + μ·p(t|C)) / (|d| + μ))`.
pub fn lm_dirichlet_score(
    doc: &Document,
    query: &Query,
    stats: &CorpusStats,
    mu: f64,
) -> Result<f64> {
    let terms = doc.terms();
    let tf = term_counts(&terms);
    let denom = terms.len() as f64 + mu;
    let mut score = 0.0;
    for t in query.terms() {
        let p = stats.collection_prob(&t);
        if p <= 0.0 {
            return Err(Error::ZeroCollectionProbability(t));
        }
        let f = tf.get(t.as_str()).copied().unwrap_or(0) as f64;
        score += ((f + mu * p) / denom).ln();
    }
    Ok(score)
}

/// Ranks `docs` by descending score; ties go to the smaller doc id.
pub fn rank_documents<R: RankingFunction + ?Sized>(
    docs: &[Document],
    query: &Query,
    model: &R,
    stats: &CorpusStats,
    round_index: usize,
) -> Result<Ranking> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments {
            needed: 2,
            got: docs.len(),
        });
    }
    let mut scored = docs
        .iter()
        .map(|d| Ok((model.score(d, query, stats)?, d.id())))
        .collect::<Result<Vec<(f64, &str)>>>()?;
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    Ranking::new(
        query.id.clone(),
        round_index,
        scored.into_iter().map(|(_, id)| id.to_string()).collect(),
    )
}
