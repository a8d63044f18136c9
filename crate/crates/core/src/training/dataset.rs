use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{promotion_label, CoherenceModel, TrainingConfig};
use crate::bot::{apply_replacement, BotConfig, FeatureContext, PairFeatures, PassagePair};
use crate::engine::{rank_documents, Document, EngineModel, Query};
use crate::error::{Error, Result};
use crate::snapshot::{read_jsonl, write_jsonl, QuerySnapshot};
use crate::text::{CorpusStats, EmbeddingStore};

/// One candidate pair with its raw features and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    /// The `d_cur` whose candidate set this pair belongs to.
    pub group_id: String,
    pub query_id: String,
    #[serde(flatten)]
    pub pair: PassagePair,
    pub features: PairFeatures,
    pub r: u32,
    pub c: f64,
    pub l: f64,
}

impl LabeledPair {
    pub fn group_key(query_id: &str, doc_id: &str) -> String {
        format!("{query_id}/{doc_id}")
    }
}

/// Recomputes `l` from `r` and `c` under `config`.
pub fn relabel(pairs: &mut [LabeledPair], config: &TrainingConfig) {
    for p in pairs {
        p.l = config.label(p.r as f64, p.c);
    }
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<LabeledPair>> {
    read_jsonl(reader)
}

pub fn write_dataset<W: Write>(pairs: &[LabeledPair], out: W) -> Result<()> {
    write_jsonl(pairs, out)
}

/// Designated training documents: second-ranked and last-ranked.
fn designated(ids: &[String]) -> Vec<&str> {
    let mut out = Vec::new();
    if ids.len() >= 2 {
        out.push(ids[1].as_str());
    }
    if ids.len() >= 3 {
        out.push(ids[ids.len() - 1].as_str());
    }
    out
}

/// Labels every candidate pair of the designated documents of every query.
///
/// `r` comes from re-ranking the current documents with only `d_cur`
/// swapped for its modified version; corpus statistics stay fixed. Pairs
/// whose swap would exceed the term cap are not emitted since the bot could
/// never apply them.
#[allow(clippy::too_many_arguments)]
pub fn generate_training_set(
    snapshots: &[QuerySnapshot],
    engine: &EngineModel,
    stats: &CorpusStats,
    store: &EmbeddingStore,
    bot: &BotConfig,
    config: &TrainingConfig,
    coherence: &dyn CoherenceModel,
) -> Result<Vec<LabeledPair>> {
    config.validate()?;
    let mut jobs = Vec::new();
    for s in snapshots {
        let current = s.history.current()?;
        let docs: Vec<Document> = s
            .history
            .current_documents()?
            .into_iter()
            .cloned()
            .collect();
        let recomputed = rank_documents(&docs, &s.query, engine, stats, current.round_index)?;
        if recomputed.doc_ids != current.doc_ids {
            return Err(Error::RankingMismatch {
                query_id: s.query.id.clone(),
                stored: current.doc_ids.clone(),
                recomputed: recomputed.doc_ids,
            });
        }
        for d in designated(&current.doc_ids) {
            jobs.push((s, d.to_string()));
        }
    }
    let groups = jobs
        .par_iter()
        .map(|(s, d)| label_group(&s.query, s, d, engine, stats, store, bot, config, coherence))
        .collect::<Result<Vec<_>>>()?;
    Ok(groups.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn label_group(
    query: &Query,
    snapshot: &QuerySnapshot,
    d_cur_id: &str,
    engine: &EngineModel,
    stats: &CorpusStats,
    store: &EmbeddingStore,
    bot: &BotConfig,
    config: &TrainingConfig,
    coherence: &dyn CoherenceModel,
) -> Result<Vec<LabeledPair>> {
    let history = &snapshot.history;
    let current = history.current()?;
    let n = current.len();
    let rank_cur = current
        .rank_of(d_cur_id)
        .ok_or_else(|| Error::UnknownDocument(d_cur_id.to_string()))?;
    let docs: Vec<Document> = history.current_documents()?.into_iter().cloned().collect();
    let ctx = FeatureContext::new(d_cur_id, query, history, stats, store, bot)?;
    let group_id = LabeledPair::group_key(&query.id, d_cur_id);

    let mut out = Vec::new();
    for pair in ctx.pairs() {
        let d_next = match apply_replacement(ctx.d_cur(), &pair, ctx.pool(), bot.term_cap) {
            Ok(d) => d,
            Err(Error::LengthCapExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let swapped: Vec<Document> = docs
            .iter()
            .map(|d| {
                if d.id() == d_cur_id {
                    d_next.clone()
                } else {
                    d.clone()
                }
            })
            .collect();
        let next = rank_documents(&swapped, query, engine, stats, current.round_index + 1)?;
        let rank_next = next
            .rank_of(d_next.id())
            .expect("modified document is ranked");
        let r = promotion_label(rank_cur, rank_next, n)?;
        let target = &ctx.pool()[ctx.pool_index(&pair).expect("pair comes from the pool")].text;
        let c = coherence.label(ctx.d_cur(), pair.src_index, target, store);
        let features = ctx.features(&pair)?;
        out.push(LabeledPair {
            group_id: group_id.clone(),
            query_id: query.id.clone(),
            l: config.label(r as f64, c),
            pair,
            features,
            r,
            c,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bot::RankingHistory;
    use crate::engine::Ranking;
    use crate::text::OovFallback;
    use crate::training::EmbeddingCoherenceProxy;

    fn world(texts: &[(&str, &str)], query: &str) -> (QuerySnapshot, CorpusStats, EngineModel) {
        let docs: Vec<Document> = texts
            .iter()
            .map(|(id, t)| Document::new(*id, format!("a-{id}"), *t, 150).unwrap())
            .collect();
        let mut b = CorpusStats::builder();
        for d in &docs {
            b.add_document(d.text());
        }
        b.add_query(query);
        b.stopwords(crate::text::english_stopwords());
        let stats = b.build();
        let q = Query::new("q1", query).unwrap();
        let engine = EngineModel::LmDirichlet { mu: 1000.0 };
        let ranking = rank_documents(&docs, &q, &engine, &stats, 1).unwrap();
        let mut h = RankingHistory::new("q1");
        h.push(ranking, docs).unwrap();
        (
            QuerySnapshot {
                query: q,
                history: h,
            },
            stats,
            engine,
        )
    }

    fn store() -> EmbeddingStore {
        EmbeddingStore::new(16, OovFallback::Hashed).unwrap()
    }

    #[test]
    fn counts_pairs_for_second_ranked() {
        let (snap, stats, engine) = world(
            &[
                (
                    "a",
                    "Apple apple apple pie. Apple tart here. Apple cake there. Apple crumble.",
                ),
                ("b", "Apple apple sauce. Apple juice today. Pear apple mix."),
                ("c", "Apple once. Nothing more. Words here."),
            ],
            "apple",
        );
        let ids = &snap.history.current().unwrap().doc_ids;
        assert_eq!(ids[0], "a");
        assert_eq!(ids[1], "b");
        let data = generate_training_set(
            &[snap],
            &engine,
            &stats,
            &store(),
            &BotConfig::default(),
            &TrainingConfig::default(),
            &EmbeddingCoherenceProxy,
        )
        .unwrap();
        let second = data.iter().filter(|p| p.group_id == "q1/b").count();
        let last = data.iter().filter(|p| p.group_id == "q1/c").count();
        assert_eq!(second, 3 * 4);
        assert_eq!(last, 3 * 7);
        for p in &data {
            assert!(p.r <= 2);
            assert!((0.0..=4.0).contains(&p.c));
            assert_eq!(p.l, TrainingConfig::default().label(p.r as f64, p.c));
        }
    }

    #[test]
    fn mismatched_engine_is_rejected() {
        let (mut snap, stats, engine) = world(
            &[("a", "Apple apple. Pie."), ("b", "Pear. Apple.")],
            "apple",
        );
        let docs: Vec<Document> = snap
            .history
            .current_documents()
            .unwrap()
            .into_iter()
            .cloned()
            .collect();
        let mut h = RankingHistory::new("q1");
        h.push(
            Ranking::new("q1", 1, vec!["b".into(), "a".into()]).unwrap(),
            docs,
        )
        .unwrap();
        snap.history = h;
        let err = generate_training_set(
            &[snap],
            &engine,
            &stats,
            &store(),
            &BotConfig::default(),
            &TrainingConfig::default(),
            &EmbeddingCoherenceProxy,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RankingMismatch { .. }));
    }

    #[test]
    fn record_round_trip() {
        let (snap, stats, engine) = world(
            &[("a", "Apple apple. Pie."), ("b", "Pear. Apple.")],
            "apple",
        );
        let data = generate_training_set(
            &[snap],
            &engine,
            &stats,
            &store(),
            &BotConfig::default(),
            &TrainingConfig::default(),
            &EmbeddingCoherenceProxy,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let line: serde_json::Value =
            serde_json::from_slice(buf.split(|b| *b == b'\n').next().unwrap()).unwrap();
        for key in [
            "group_id",
            "query_id",
            "src_index",
            "target_doc_id",
            "target_index",
            "features",
            "r",
            "c",
            "l",
        ] {
            assert!(line.get(key).is_some(), "missing {key}");
        }
        assert_eq!(read_dataset(&buf[..]).unwrap(), data);
    }
}
