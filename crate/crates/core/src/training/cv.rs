use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ranksvm::train_pairwise_with;
use super::{relabel, LabelMode, LabeledPair, TrainingConfig};
use crate::bot::{preference_order, PairModel, PassagePair};
use crate::engine::ndcg_at_k;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub pairs: usize,
    pub groups: usize,
    pub queries: usize,
    pub mean_pairs_per_group: f64,
    pub std_pairs_per_group: f64,
}

impl DatasetSummary {
    pub fn of(data: &[LabeledPair]) -> DatasetSummary {
        let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
        let mut queries = BTreeSet::new();
        for p in data {
            *sizes.entry(p.group_id.as_str()).or_default() += 1;
            queries.insert(p.query_id.as_str());
        }
        let n = sizes.len().max(1) as f64;
        let mean = data.len() as f64 / n;
        let var = sizes
            .values()
            .map(|&s| (s as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        DatasetSummary {
            pairs: data.len(),
            groups: sizes.len(),
            queries: queries.len(),
            mean_pairs_per_group: mean,
            std_pairs_per_group: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub c: f64,
    pub fold_ndcg: Vec<f64>,
    pub mean_ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub chosen_c: f64,
    pub per_fold_ndcg: Vec<f64>,
    pub grid: Vec<CvResult>,
    pub label_mode: LabelMode,
    pub beta: f64,
    pub epsilon: f64,
    pub folds: usize,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub model_fingerprint: String,
    pub dataset: DatasetSummary,
}

/// A pair model together with how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    #[serde(flatten)]
    pub model: PairModel,
    pub metadata: TrainingMetadata,
}

impl TrainedModel {
    pub fn read<R: BufRead>(mut reader: R) -> Result<TrainedModel> {
        let mut s = String::new();
        reader.read_to_string(&mut s)?;
        let line = s
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Model("empty model file".into()))?;
        serde_json::from_str(line).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

fn sha256_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}

pub fn model_fingerprint(model: &PairModel) -> String {
    sha256_json(model)
}

pub fn dataset_fingerprint(data: &[LabeledPair]) -> String {
    let mut h = Sha256::new();
    for p in data {
        h.update(serde_json::to_vec(p).expect("serializable"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// NDCG@5 of one group's pairs ordered by `model`, graded by `l`.
pub fn group_ndcg(model: &PairModel, group: &[&LabeledPair]) -> f64 {
    let rows: Vec<_> = group
        .iter()
        .map(|p| model.normalize(&p.features.0))
        .collect();
    let scores: Vec<f64> = rows.iter().map(|x| model.score(x)).collect();
    let pairs: Vec<PassagePair> = group.iter().map(|p| p.pair.clone()).collect();
    let labels: Vec<f64> = preference_order(&scores, &pairs, model.tie_tolerance(&rows))
        .into_iter()
        .map(|i| group[i].l)
        .collect();
    ndcg_at_k(&labels, 5)
}

fn by_group(data: &[LabeledPair]) -> BTreeMap<&str, Vec<&LabeledPair>> {
    let mut groups: BTreeMap<&str, Vec<&LabeledPair>> = BTreeMap::new();
    for p in data {
        groups.entry(p.group_id.as_str()).or_default().push(p);
    }
    groups
}

/// Picks `C` by group-level k-fold NDCG@5 and retrains on everything.
///
/// Labels are recomputed from `r` and `c` under `config.label_mode` first.
/// Validation groups with no positive label carry no ordering information
/// and are left out of the fold average. Ties between `C` values go to the
/// smallest.
pub fn cross_validate(data: &[LabeledPair], config: &TrainingConfig) -> Result<TrainedModel> {
    config.validate()?;
    let mut data = data.to_vec();
    relabel(&mut data, config);
    let groups = by_group(&data);
    if groups.len() < config.folds {
        return Err(Error::TooFewGroups {
            groups: groups.len(),
            folds: config.folds,
        });
    }
    let mut names: Vec<&str> = groups.keys().copied().collect();
    names.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let fold_of: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, g)| (*g, i % config.folds))
        .collect();

    let mut grid: Vec<f64> = config.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let opts = config.train_options();

    let mut results = Vec::new();
    for &c in &grid {
        let mut fold_ndcg = Vec::with_capacity(config.folds);
        for fold in 0..config.folds {
            let train: Vec<LabeledPair> = data
                .iter()
                .filter(|p| fold_of[p.group_id.as_str()] != fold)
                .cloned()
                .collect();
            let model = train_pairwise_with(&train, c, &opts)?.model;
            let scores: Vec<f64> = groups
                .iter()
                .filter(|(g, _)| fold_of[*g] == fold)
                .filter(|(_, ps)| ps.iter().any(|p| p.l > 0.0))
                .map(|(_, ps)| group_ndcg(&model, ps))
                .collect();
            fold_ndcg.push(if scores.is_empty() {
                0.0
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            });
        }
        let mean_ndcg = fold_ndcg.iter().sum::<f64>() / fold_ndcg.len() as f64;
        results.push(CvResult {
            c,
            fold_ndcg,
            mean_ndcg,
        });
    }
    let best = results
        .iter()
        .fold(None::<&CvResult>, |best, r| match best {
            Some(b) if b.mean_ndcg >= r.mean_ndcg => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty");

    let model = train_pairwise_with(&data, best.c, &opts)?.model;
    let metadata = TrainingMetadata {
        chosen_c: best.c,
        per_fold_ndcg: best.fold_ndcg.clone(),
        grid: results.clone(),
        label_mode: config.label_mode,
        beta: config.beta,
        epsilon: config.epsilon,
        folds: config.folds,
        seed: config.seed,
        dataset_fingerprint: dataset_fingerprint(&data),
        model_fingerprint: model_fingerprint(&model),
        dataset: DatasetSummary::of(&data),
    };
    Ok(TrainedModel { model, metadata })
}
