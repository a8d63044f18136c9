use std::collections::{BTreeMap, HashSet};

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::history::{build_candidate_pool, PoolPassage, RankingHistory};
use super::{BotConfig, PassagePair, QueryTermMode};
use crate::engine::{Document, Query};
use crate::error::{Error, Result};
use crate::text::{
    embed_document, embed_text, tfidf_vector, tokenize, CorpusStats, DenseVector, EmbeddingStore,
    TermVector,
};

pub const PAIR_FEATURE_COUNT: usize = 15;

pub const PAIR_FEATURE_NAMES: [&str; PAIR_FEATURE_COUNT] = [
    "QryTermSrc",
    "QryTermTarget",
    "SimSrcTop(TF.IDF)",
    "SimTargetTop(TF.IDF)",
    "SimSrcTop(W2V)",
    "SimTargetTop(W2V)",
    "SimSrcPrevTop(TF.IDF)",
    "SimTargetPrevTop(TF.IDF)",
    "SimSrcPrevTop(W2V)",
    "SimTargetPrevTop(W2V)",
    "SimSrcTarget(W2V)",
    "SimSrcPrecPsg(W2V)",
    "SimSrcFollowPsg(W2V)",
    "SimTargetPrecPsg(W2V)",
    "SimTargetFollowPsg(W2V)",
];

/// Feature vector of one replacement candidate, in [`PAIR_FEATURE_NAMES`] order.
/// Serialized as a record keyed by feature name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures(pub [f64; PAIR_FEATURE_COUNT]);

impl Serialize for PairFeatures {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(PAIR_FEATURE_COUNT))?;
        for (name, v) in self.named() {
            map.serialize_entry(name, &v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PairFeatures {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let named = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut out = [0.0; PAIR_FEATURE_COUNT];
        for (i, name) in PAIR_FEATURE_NAMES.iter().enumerate() {
            out[i] = *named
                .get(*name)
                .ok_or_else(|| serde::de::Error::custom(format!("missing feature `{name}`")))?;
        }
        if named.len() != PAIR_FEATURE_COUNT {
            return Err(serde::de::Error::custom("unknown pair feature"));
        }
        Ok(PairFeatures(out))
    }
}

impl PairFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        PAIR_FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        PAIR_FEATURE_NAMES
            .iter()
            .copied()
            .zip(self.0.iter().copied())
    }

    pub fn qry_term_src(&self) -> f64 {
        self.0[0]
    }

    pub fn qry_term_target(&self) -> f64 {
        self.0[1]
    }
}

/// `w_i = α·exp(−α·i) / Σ_{j=1..p} exp(−α·j)` for `i = 1..=p`.
///
/// The weights sum to `α`, not 1; this only rescales the centroid, which the
/// cosine features do not see.
pub fn time_decay_weights(p: usize, alpha: f64) -> Vec<f64> {
    let norm: f64 = (1..=p).map(|j| (-alpha * j as f64).exp()).sum();
    (1..=p)
        .map(|i| alpha * (-alpha * i as f64).exp() / norm)
        .collect()
}

fn doc_vectors(
    doc: &Document,
    stats: &CorpusStats,
    store: &EmbeddingStore,
) -> Result<(TermVector, DenseVector)> {
    Ok((
        tfidf_vector(doc.text(), stats),
        embed_document(doc.passages(), store)?,
    ))
}

/// Centroids of the `m = min(m_max, rank − 1)` best documents ranked above
/// `d_cur_id` in the current ranking.
pub fn compute_top_centroids(
    history: &RankingHistory,
    d_cur_id: &str,
    m_max: usize,
    stats: &CorpusStats,
    store: &EmbeddingStore,
) -> Result<(TermVector, DenseVector)> {
    let current = history.current()?;
    let rank = current
        .rank_of(d_cur_id)
        .ok_or_else(|| Error::UnknownDocument(d_cur_id.to_string()))?;
    if rank == 1 {
        return Err(Error::NothingToMimic(d_cur_id.to_string()));
    }
    let m = m_max.max(1).min(rank - 1);
    let vectors = current.doc_ids[..m]
        .iter()
        .map(|id| doc_vectors(history.document(id)?, stats, store))
        .collect::<Result<Vec<_>>>()?;
    let tf = TermVector::mean(vectors.iter().map(|v| &v.0));
    let w2v = DenseVector::mean(vectors.iter().map(|v| &v.1), store.dimension())?;
    Ok((tf, w2v))
}

/// Time-decayed sum of the top documents of every observed ranking.
pub fn compute_past_centroid(
    history: &RankingHistory,
    alpha: f64,
    stats: &CorpusStats,
    store: &EmbeddingStore,
) -> Result<(TermVector, DenseVector)> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let weights = time_decay_weights(history.len(), alpha);
    let mut tops = Vec::with_capacity(weights.len());
    for ranking in history.recent() {
        let top = ranking.top().ok_or(Error::EmptyHistory)?;
        tops.push(doc_vectors(history.document(top)?, stats, store)?);
    }
    let tf = TermVector::weighted_sum(weights.iter().zip(&tops).map(|(w, v)| (*w, &v.0)));
    let mut w2v = DenseVector::zeros(store.dimension());
    for (w, v) in weights.iter().zip(&tops) {
        if v.1.dimension() != w2v.dimension() {
            return Err(Error::DimensionMismatch {
                left: w2v.dimension(),
                right: v.1.dimension(),
            });
        }
        w2v.add_scaled(&v.1, *w);
    }
    Ok((tf, w2v))
}

#[derive(Debug, Clone)]
struct PassageRepr {
    tfidf: TermVector,
    w2v: DenseVector,
    qry: f64,
}

impl PassageRepr {
    fn new(text: &str, query: &QueryTerms, stats: &CorpusStats, store: &EmbeddingStore) -> Self {
        PassageRepr {
            tfidf: tfidf_vector(text, stats),
            w2v: embed_text(text, store),
            qry: query.fraction(text),
        }
    }
}

#[derive(Debug, Clone)]
struct QueryTerms {
    distinct: HashSet<String>,
    mode: QueryTermMode,
}

impl QueryTerms {
    fn fraction(&self, text: &str) -> f64 {
        let terms = tokenize(text);
        match self.mode {
            QueryTermMode::OccurrenceFraction => {
                if terms.is_empty() {
                    return 0.0;
                }
                terms.iter().filter(|t| self.distinct.contains(*t)).count() as f64
                    / terms.len() as f64
            }
            QueryTermMode::DistinctCoverage => {
                if self.distinct.is_empty() {
                    return 0.0;
                }
                let present: HashSet<&String> = terms.iter().collect();
                self.distinct.iter().filter(|t| present.contains(t)).count() as f64
                    / self.distinct.len() as f64
            }
        }
    }
}

/// Everything needed to featurize the candidates of one modification
/// decision, computed once.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    d_cur: Document,
    pool: Vec<PoolPassage>,
    top: (TermVector, DenseVector),
    past: (TermVector, DenseVector),
    src: Vec<PassageRepr>,
    targets: Vec<PassageRepr>,
}

impl FeatureContext {
    pub fn new(
        d_cur_id: &str,
        query: &Query,
        history: &RankingHistory,
        stats: &CorpusStats,
        store: &EmbeddingStore,
        config: &BotConfig,
    ) -> Result<Self> {
        let pool = build_candidate_pool(history, d_cur_id)?;
        let d_cur = history.document(d_cur_id)?.clone();
        let top = compute_top_centroids(history, d_cur_id, config.m_max, stats, store)?;
        let past = compute_past_centroid(history, config.alpha, stats, store)?;
        let qt = QueryTerms {
            distinct: query.terms().into_iter().collect(),
            mode: config.query_term_mode,
        };
        let src = d_cur
            .passages()
            .iter()
            .map(|p| PassageRepr::new(p, &qt, stats, store))
            .collect();
        let targets = pool
            .iter()
            .map(|p| PassageRepr::new(&p.text, &qt, stats, store))
            .collect();
        Ok(FeatureContext {
            d_cur,
            pool,
            top,
            past,
            src,
            targets,
        })
    }

    pub fn d_cur(&self) -> &Document {
        &self.d_cur
    }

    pub fn pool(&self) -> &[PoolPassage] {
        &self.pool
    }

    /// Rescales the stored centroids. Cosine features must not change.
    pub fn scale_centroids(&mut self, top: f64, past: f64) {
        self.top = (self.top.0.scaled(top), self.top.1.scaled(top));
        self.past = (self.past.0.scaled(past), self.past.1.scaled(past));
    }

    /// Every `(source passage, pool passage)` pair, in tie-break order.
    pub fn pairs(&self) -> Vec<PassagePair> {
        let mut out = Vec::with_capacity(self.src.len() * self.pool.len());
        for s in 0..self.src.len() {
            for p in &self.pool {
                out.push(PassagePair {
                    src_index: s,
                    target_doc_id: p.doc_id.clone(),
                    target_rank: p.rank,
                    target_index: p.index,
                });
            }
        }
        out
    }

    pub fn pool_index(&self, pair: &PassagePair) -> Option<usize> {
        self.pool
            .iter()
            .position(|p| p.doc_id == pair.target_doc_id && p.index == pair.target_index)
    }

    pub fn features(&self, pair: &PassagePair) -> Result<PairFeatures> {
        let n = self.src.len();
        if pair.src_index >= n {
            return Err(Error::InvalidPair(format!(
                "source index {} out of range for {n} passages",
                pair.src_index
            )));
        }
        let t = self.pool_index(pair).ok_or_else(|| {
            Error::InvalidPair(format!(
                "{}#{} is not in the pool",
                pair.target_doc_id, pair.target_index
            ))
        })?;
        Ok(self.features_at(pair.src_index, t))
    }

    fn features_at(&self, s: usize, t: usize) -> PairFeatures {
        let src = &self.src[s];
        let tgt = &self.targets[t];
        let cos = |a: &DenseVector, b: &DenseVector| a.cosine(b).unwrap_or(0.0);

        let (src_prec, src_follow, tgt_prec, tgt_follow) = match context_indices(s, self.src.len())
        {
            Some((prec, follow)) => {
                let (pv, fv) = (&self.src[prec].w2v, &self.src[follow].w2v);
                (
                    cos(&src.w2v, pv),
                    cos(&src.w2v, fv),
                    cos(&tgt.w2v, pv),
                    cos(&tgt.w2v, fv),
                )
            }
            None => (0.0, 0.0, 0.0, 0.0),
        };

        PairFeatures([
            src.qry,
            tgt.qry,
            src.tfidf.cosine(&self.top.0),
            tgt.tfidf.cosine(&self.top.0),
            cos(&src.w2v, &self.top.1),
            cos(&tgt.w2v, &self.top.1),
            src.tfidf.cosine(&self.past.0),
            tgt.tfidf.cosine(&self.past.0),
            cos(&src.w2v, &self.past.1),
            cos(&tgt.w2v, &self.past.1),
            cos(&src.w2v, &tgt.w2v),
            src_prec,
            src_follow,
            tgt_prec,
            tgt_follow,
        ])
    }

    /// Features of every pair from [`FeatureContext::pairs`], same order.
    pub fn all_features(&self) -> Vec<PairFeatures> {
        let mut out = Vec::with_capacity(self.src.len() * self.targets.len());
        for s in 0..self.src.len() {
            for t in 0..self.targets.len() {
                out.push(self.features_at(s, t));
            }
        }
        out
    }
}

/// Preceding and following passage of `src` in a document of `n` passages.
/// At either edge the one existing neighbour fills both slots; a
/// single-passage document has no context.
pub(crate) fn context_indices(src: usize, n: usize) -> Option<(usize, usize)> {
    if n < 2 {
        return None;
    }
    let prec = if src == 0 { 1 } else { src - 1 };
    let follow = if src + 1 == n { n - 2 } else { src + 1 };
    Some((prec, follow))
}

pub fn extract_pair_features(
    pair: &PassagePair,
    d_cur_id: &str,
    query: &Query,
    history: &RankingHistory,
    stats: &CorpusStats,
    store: &EmbeddingStore,
    config: &BotConfig,
) -> Result<PairFeatures> {
    FeatureContext::new(d_cur_id, query, history, stats, store, config)?.features(pair)
}
