use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bonferroni, permutation_test, quality_proxy, raw_and_scaled_promotion, Environment};
use crate::bot::{modify_document, BotConfig, PairModel, RankingHistory};
use crate::engine::{rank_documents, Document, EngineModel, Query};
use crate::error::{Error, Result};
use crate::snapshot::QuerySnapshot;

pub const STATIC: &str = "static";
pub const STUDENT: &str = "student";

/// One query's history through round `t` plus every author's round `t+1`
/// version, keyed by author id.
#[derive(Debug, Clone)]
pub struct OfflineQuery {
    pub query: Query,
    pub history: RankingHistory,
    pub next_versions: BTreeMap<String, Document>,
}

impl OfflineQuery {
    /// History through round `t` of `snapshot`, with round `t + 1` as the
    /// authors' next versions.
    pub fn from_snapshot(snapshot: &QuerySnapshot, t: usize) -> Result<OfflineQuery> {
        let next = snapshot.history.rankings().get(t).ok_or_else(|| {
            Error::Config(format!(
                "query `{}` has no round {}",
                snapshot.query.id,
                t + 1
            ))
        })?;
        let next_versions = next
            .doc_ids
            .iter()
            .map(|id| {
                let d = snapshot.history.document(id)?;
                Ok((d.author_id().to_string(), d.clone()))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(OfflineQuery {
            query: snapshot.query.clone(),
            history: snapshot.history.truncated(t),
            next_versions,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OfflineConfig {
    /// Bot variants by name, e.g. `l`, `r_only`, `c_only`.
    pub variants: Vec<(String, Arc<PairModel>)>,
    pub bot: BotConfig,
    /// Initial ranks whose documents get modified.
    pub ranks: Vec<usize>,
    /// Pairs of arm names to test; empty means the default set.
    pub comparisons: Vec<(String, String)>,
    pub n_perm: usize,
    pub seed: u64,
}

impl OfflineConfig {
    pub fn new(variants: Vec<(String, Arc<PairModel>)>) -> Self {
        OfflineConfig {
            variants,
            bot: BotConfig::default(),
            ranks: vec![2, 3, 4, 5],
            comparisons: Vec::new(),
            n_perm: 100_000,
            seed: 0,
        }
    }

    /// Every bot variant against the static and student arms, plus
    /// `r_only` against `c_only` when both exist.
    fn comparison_pairs(&self) -> Vec<(String, String)> {
        if !self.comparisons.is_empty() {
            return self.comparisons.clone();
        }
        let mut out = Vec::new();
        for (v, _) in &self.variants {
            out.push((v.clone(), STATIC.to_string()));
            out.push((v.clone(), STUDENT.to_string()));
        }
        let has = |n: &str| self.variants.iter().any(|(v, _)| v == n);
        if has("r_only") && has("c_only") {
            out.push(("r_only".into(), "c_only".into()));
        }
        out
    }

    fn arms(&self) -> Vec<String> {
        let mut arms: Vec<String> = self.variants.iter().map(|(v, _)| v.clone()).collect();
        arms.push(STATIC.into());
        arms.push(STUDENT.into());
        arms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub rank: usize,
    pub raw_promotion: i64,
    pub scaled_promotion: f64,
    pub quality_proxy: f64,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineCell {
    pub query_id: String,
    pub doc_id: String,
    pub author: String,
    pub rank_prev: usize,
    pub outcomes: BTreeMap<String, VariantOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub query_id: String,
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub arm: String,
    pub cells: usize,
    pub mean_rank: f64,
    pub mean_raw: f64,
    pub mean_scaled: f64,
    pub mean_quality_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub cells: Vec<OfflineCell>,
    pub skipped: Vec<SkippedCell>,
    pub summary: Vec<VariantSummary>,
    /// Tests over per-query mean raw promotion.
    pub comparisons: Vec<Comparison>,
}

impl OfflineReport {
    pub fn arm(&self, name: &str) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.arm == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    /// Per-query mean raw promotion of `arm`, in query order.
    pub fn per_query_raw(&self, arm: &str) -> Vec<f64> {
        let mut by_query: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for c in &self.cells {
            if let Some(o) = c.outcomes.get(arm) {
                by_query
                    .entry(c.query_id.as_str())
                    .or_default()
                    .push(o.raw_promotion as f64);
            }
        }
        by_query
            .values()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }
}

enum CellResult {
    Done(OfflineCell),
    Skipped(SkippedCell),
}

fn eval_query(
    q: &OfflineQuery,
    config: &OfflineConfig,
    engine: &EngineModel,
    env: &Environment,
) -> Result<Vec<CellResult>> {
    let current = q.history.current()?;
    let n = current.len();
    let mut out = Vec::new();
    for &rank in &config.ranks {
        let Some(doc_id) = current.doc_ids.get(rank - 1) else {
            continue;
        };
        let d_cur = q.history.document(doc_id)?;
        let skip = |reason: String| {
            CellResult::Skipped(SkippedCell {
                query_id: q.query.id.clone(),
                doc_id: doc_id.clone(),
                reason,
            })
        };
        let Some(student) = q.next_versions.get(d_cur.author_id()) else {
            out.push(skip(format!(
                "no next-round version from `{}`",
                d_cur.author_id()
            )));
            continue;
        };
        let mut others = Vec::new();
        let mut missing = None;
        for other_id in current.doc_ids.iter().filter(|id| *id != doc_id) {
            let author = q.history.document(other_id)?.author_id();
            match q.next_versions.get(author) {
                Some(d) => others.push(d.clone()),
                None => missing = Some(author.to_string()),
            }
        }
        if let Some(author) = missing {
            out.push(skip(format!("no next-round version from `{author}`")));
            continue;
        }

        let mut arms: Vec<(String, Document)> = Vec::new();
        for (name, model) in &config.variants {
            let m = modify_document(
                doc_id,
                &q.query,
                &q.history,
                model,
                &env.stats,
                &env.store,
                &config.bot,
            )?;
            arms.push((name.clone(), m.document));
        }
        arms.push((STATIC.into(), d_cur.clone()));
        arms.push((STUDENT.into(), student.clone()));

        let mut outcomes = BTreeMap::new();
        for (name, doc) in arms {
            let changed = doc.passages() != d_cur.passages();
            let doc = doc.with_id(format!("{}#{name}", d_cur.author_id()));
            let mut docs = others.clone();
            docs.push(doc.clone());
            let ranking =
                rank_documents(&docs, &q.query, engine, &env.stats, current.round_index + 1)?;
            let new_rank = ranking.rank_of(doc.id()).expect("arm document is ranked");
            let (raw, scaled) = raw_and_scaled_promotion(rank, new_rank, n)?.unwrap_or((0, 0.0));
            outcomes.insert(
                name,
                VariantOutcome {
                    rank: new_rank,
                    raw_promotion: raw,
                    scaled_promotion: scaled,
                    quality_proxy: quality_proxy(&doc, &env.stats),
                    changed,
                },
            );
        }
        out.push(CellResult::Done(OfflineCell {
            query_id: q.query.id.clone(),
            doc_id: doc_id.clone(),
            author: d_cur.author_id().to_string(),
            rank_prev: rank,
            outcomes,
        }));
    }
    Ok(out)
}

/// Modifies each document at the configured ranks with every bot variant
/// and compares against leaving it alone and against its author's own next
/// version. Each arm is ranked against the other authors' next versions.
pub fn offline_eval(
    queries: &[OfflineQuery],
    config: &OfflineConfig,
    engine: &EngineModel,
    env: &Environment,
) -> Result<OfflineReport> {
    let results = queries
        .par_iter()
        .map(|q| eval_query(q, config, engine, env))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            CellResult::Done(c) => cells.push(c),
            CellResult::Skipped(s) => skipped.push(s),
        }
    }

    let summary = config
        .arms()
        .into_iter()
        .map(|arm| {
            let outs: Vec<&VariantOutcome> =
                cells.iter().filter_map(|c| c.outcomes.get(&arm)).collect();
            let k = outs.len().max(1) as f64;
            VariantSummary {
                cells: outs.len(),
                mean_rank: outs.iter().map(|o| o.rank as f64).sum::<f64>() / k,
                mean_raw: outs.iter().map(|o| o.raw_promotion as f64).sum::<f64>() / k,
                mean_scaled: outs.iter().map(|o| o.scaled_promotion).sum::<f64>() / k,
                mean_quality_proxy: outs.iter().map(|o| o.quality_proxy).sum::<f64>() / k,
                arm,
            }
        })
        .collect();

    let mut report = OfflineReport {
        cells,
        skipped,
        summary,
        comparisons: Vec::new(),
    };
    let pairs = config.comparison_pairs();
    let m = pairs.len();
    for (i, (a, b)) in pairs.into_iter().enumerate() {
        let xa = report.per_query_raw(&a);
        let xb = report.per_query_raw(&b);
        if xa.is_empty() || xa.len() != xb.len() {
            continue;
        }
        let p = permutation_test(&xa, &xb, config.n_perm, config.seed.wrapping_add(i as u64))?;
        report.comparisons.push(Comparison {
            mean_a: xa.iter().sum::<f64>() / xa.len() as f64,
            mean_b: xb.iter().sum::<f64>() / xb.len() as f64,
            p_value: p,
            p_bonferroni: bonferroni(p, m),
            a,
            b,
        });
    }
    Ok(report)
}
