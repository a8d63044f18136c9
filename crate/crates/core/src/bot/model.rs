use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{PAIR_FEATURE_COUNT, PAIR_FEATURE_NAMES};
use super::PassagePair;
use crate::error::{Error, Result};

pub type FeatureRow = [f64; PAIR_FEATURE_COUNT];

/// Per-feature `(min, max)` used for min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBounds {
    pub min: FeatureRow,
    pub max: FeatureRow,
}

impl FeatureBounds {
    pub fn from_rows(rows: &[FeatureRow]) -> Option<FeatureBounds> {
        let first = rows.first()?;
        let mut b = FeatureBounds {
            min: *first,
            max: *first,
        };
        for row in &rows[1..] {
            for (i, &x) in row.iter().enumerate() {
                b.min[i] = b.min[i].min(x);
                b.max[i] = b.max[i].max(x);
            }
        }
        Some(b)
    }

    /// `(x − min)/(max − min)` clipped to `[0, 1]`; constant features map to 0.
    pub fn apply(&self, row: &FeatureRow) -> FeatureRow {
        let mut out = [0.0; PAIR_FEATURE_COUNT];
        for (i, &x) in row.iter().enumerate() {
            let range = self.max[i] - self.min[i];
            out[i] = if range > 0.0 {
                ((x - self.min[i]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}

/// Normalizes every column of `rows` to `[0, 1]` by its own min and max.
pub fn min_max_normalize(rows: &[FeatureRow]) -> Result<(Vec<FeatureRow>, FeatureBounds)> {
    let bounds = FeatureBounds::from_rows(rows).ok_or(Error::NoCandidates)?;
    Ok((rows.iter().map(|r| bounds.apply(r)).collect(), bounds))
}

/// Linear pair scorer with the normalization bounds it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairModelRecord", into = "PairModelRecord")]
pub struct PairModel {
    pub weights: FeatureRow,
    pub bounds: FeatureBounds,
}

#[derive(Serialize, Deserialize)]
struct PairModelRecord {
    weights: BTreeMap<String, f64>,
    bounds: BTreeMap<String, [f64; 2]>,
}

impl From<PairModel> for PairModelRecord {
    fn from(m: PairModel) -> Self {
        let weights = PAIR_FEATURE_NAMES
            .iter()
            .zip(m.weights)
            .map(|(n, w)| (n.to_string(), w))
            .collect();
        let bounds = PAIR_FEATURE_NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), [m.bounds.min[i], m.bounds.max[i]]))
            .collect();
        PairModelRecord { weights, bounds }
    }
}

impl TryFrom<PairModelRecord> for PairModel {
    type Error = Error;

    fn try_from(r: PairModelRecord) -> Result<Self> {
        for name in r.weights.keys().chain(r.bounds.keys()) {
            if !PAIR_FEATURE_NAMES.contains(&name.as_str()) {
                return Err(Error::Model(format!("unknown pair feature `{name}`")));
            }
        }
        let mut m = PairModel::zero();
        for (i, name) in PAIR_FEATURE_NAMES.iter().enumerate() {
            m.weights[i] = *r
                .weights
                .get(*name)
                .ok_or_else(|| Error::Model(format!("missing weight for `{name}`")))?;
            let [lo, hi] = *r
                .bounds
                .get(*name)
                .ok_or_else(|| Error::Model(format!("missing bounds for `{name}`")))?;
            m.bounds.min[i] = lo;
            m.bounds.max[i] = hi;
        }
        Ok(m)
    }
}

impl PairModel {
    /// All-zero weights over unit bounds.
    pub fn zero() -> PairModel {
        PairModel {
            weights: [0.0; PAIR_FEATURE_COUNT],
            bounds: FeatureBounds {
                min: [0.0; PAIR_FEATURE_COUNT],
                max: [1.0; PAIR_FEATURE_COUNT],
            },
        }
    }

    pub fn from_named_weights<'a, I>(weights: I, bounds: FeatureBounds) -> Result<PairModel>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut m = PairModel {
            weights: [0.0; PAIR_FEATURE_COUNT],
            bounds,
        };
        let mut seen = [false; PAIR_FEATURE_COUNT];
        for (name, w) in weights {
            let i = PAIR_FEATURE_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::Model(format!("unknown pair feature `{name}`")))?;
            m.weights[i] = w;
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Model(format!(
                "missing weight for `{}`",
                PAIR_FEATURE_NAMES[i]
            )));
        }
        Ok(m)
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        PAIR_FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.weights[i])
    }

    /// `wᵀx` on an already-normalized row.
    pub fn score(&self, normalized: &FeatureRow) -> f64 {
        self.weights
            .iter()
            .zip(normalized)
            .map(|(w, x)| w * x)
            .sum()
    }

    pub fn normalize(&self, raw: &FeatureRow) -> FeatureRow {
        self.bounds.apply(raw)
    }

    /// Score gap below which two of `rows` count as tied. Proportional to
    /// the largest `Σ|wᵢxᵢ|`, so rescaling the weights rescales it too.
    pub fn tie_tolerance(&self, normalized: &[FeatureRow]) -> f64 {
        let magnitude = normalized
            .iter()
            .map(|x| {
                self.weights
                    .iter()
                    .zip(x)
                    .map(|(w, v)| (w * v).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        TIE_RELATIVE * magnitude
    }
}

const TIE_RELATIVE: f64 = 1e-12;

/// The winning candidate plus every candidate's score, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub pair: PassagePair,
    pub score: f64,
    pub scores: Vec<f64>,
}

/// Candidate indices sorted best first: score descending, then
/// [`PassagePair::order_key`] ascending among scores within `tolerance` of
/// the best remaining one.
pub(crate) fn preference_order(
    scores: &[f64],
    pairs: &[PassagePair],
    tolerance: f64,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| pairs[a].order_key().cmp(&pairs[b].order_key()))
    });
    let mut i = 0;
    while i < order.len() {
        let head = scores[order[i]];
        let j = i + order[i..]
            .iter()
            .take_while(|&&k| scores[k] >= head - tolerance)
            .count();
        order[i..j].sort_by_key(|&k| pairs[k].order_key());
        i = j;
    }
    order
}

/// Picks the pair with the highest `wᵀx` over normalized rows.
pub fn score_and_select(
    rows: &[FeatureRow],
    pairs: &[PassagePair],
    model: &PairModel,
) -> Result<Selection> {
    if rows.is_empty() {
        return Err(Error::NoCandidates);
    }
    if rows.len() != pairs.len() {
        return Err(Error::InvalidPair(format!(
            "{} rows for {} pairs",
            rows.len(),
            pairs.len()
        )));
    }
    let scores: Vec<f64> = rows.iter().map(|r| model.score(r)).collect();
    let index = preference_order(&scores, pairs, model.tie_tolerance(rows))[0];
    Ok(Selection {
        index,
        pair: pairs[index].clone(),
        score: scores[index],
        scores,
    })
}
