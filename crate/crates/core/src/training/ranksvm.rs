use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledPair;
use crate::bot::{FeatureBounds, FeatureRow, PairModel, PAIR_FEATURE_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Stop once an accepted epoch changes the objective by less than this
    /// fraction.
    pub tolerance: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 200,
            tolerance: 1e-6,
            seed: 17,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: PairModel,
    pub c: f64,
    pub constraints: usize,
    pub epochs: usize,
    /// Objective after initialization and after every epoch.
    pub objective_trace: Vec<f64>,
}

pub fn train_pairwise(data: &[LabeledPair], c: f64) -> Result<PairModel> {
    train_pairwise_with(data, c, &TrainOptions::default()).map(|r| r.model)
}

/// Difference vectors `x_i − x_j` for every within-group pair with `l_i > l_j`.
fn constraints(data: &[LabeledPair], bounds: &FeatureBounds) -> Vec<FeatureRow> {
    let mut groups: BTreeMap<&str, Vec<(FeatureRow, f64)>> = BTreeMap::new();
    for p in data {
        groups
            .entry(p.group_id.as_str())
            .or_default()
            .push((bounds.apply(&p.features.0), p.l));
    }
    let mut out = Vec::new();
    for rows in groups.values() {
        for (xi, li) in rows {
            for (xj, lj) in rows {
                if li > lj {
                    let mut d = [0.0; PAIR_FEATURE_COUNT];
                    for k in 0..PAIR_FEATURE_COUNT {
                        d[k] = xi[k] - xj[k];
                    }
                    out.push(d);
                }
            }
        }
    }
    out
}

fn dot(a: &FeatureRow, b: &FeatureRow) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(w: &FeatureRow, diffs: &[FeatureRow], c: f64) -> f64 {
    let hinge: f64 = diffs.iter().map(|d| (1.0 - dot(w, d)).max(0.0)).sum();
    0.5 * dot(w, w) + c * hinge
}

/// Minimizes `½‖w‖² + C·Σ max(0, 1 − wᵀ(x_i − x_j))` by mini-batch
/// subgradient descent over seeded shuffles.
///
/// Each epoch is a trial: if it lowers the full objective it is kept and the
/// step grows, otherwise it is discarded and the step halves, so the
/// reported objective never increases.
pub fn train_pairwise_with(
    data: &[LabeledPair],
    c: f64,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let rows: Vec<FeatureRow> = data.iter().map(|p| p.features.0).collect();
    let bounds = FeatureBounds::from_rows(&rows).ok_or(Error::NoOrderablePairs)?;
    let diffs = constraints(data, &bounds);
    if diffs.is_empty() {
        return Err(Error::NoOrderablePairs);
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Config(format!(
            "C must be finite and non-negative, got {c}"
        )));
    }

    let mut w = [0.0; PAIR_FEATURE_COUNT];
    let mut f = objective(&w, &diffs, c);
    let mut trace = vec![f];
    let mut epochs = 0;
    if c > 0.0 {
        let k = diffs.len();
        let batch = opts.batch_size.max(1);
        let mut eta = 1.0 / (1.0 + c * k as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut order: Vec<usize> = (0..k).collect();
        while epochs < opts.max_epochs {
            epochs += 1;
            order.shuffle(&mut rng);
            let mut trial = w;
            for chunk in order.chunks(batch) {
                let scale = c * k as f64 / chunk.len() as f64;
                let mut grad = trial;
                for &i in chunk {
                    let d = &diffs[i];
                    if dot(&trial, d) < 1.0 {
                        for j in 0..PAIR_FEATURE_COUNT {
                            grad[j] -= scale * d[j];
                        }
                    }
                }
                for j in 0..PAIR_FEATURE_COUNT {
                    trial[j] -= eta * grad[j];
                }
            }
            let g = objective(&trial, &diffs, c);
            if g <= f {
                let change = (f - g) / f.abs().max(f64::MIN_POSITIVE);
                w = trial;
                f = g;
                eta *= 1.1;
                trace.push(f);
                if change < opts.tolerance {
                    break;
                }
            } else {
                eta *= 0.5;
                trace.push(f);
            }
        }
    }
    Ok(TrainReport {
        model: PairModel { weights: w, bounds },
        c,
        constraints: diffs.len(),
        epochs,
        objective_trace: trace,
    })
}
