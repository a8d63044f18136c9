//! Manufacturing labeled passage pairs and learning the pair ranker.
//!
//! Each candidate pair gets a promotion label `r` from counterfactual
//! re-ranking and a coherence label `c` from a proxy; the two are combined
//! into a smoothed harmonic mean `l`, which a pairwise linear SVM learns to
//! order within each document's candidate set.

mod coherence;
mod cv;
mod dataset;
mod ranksvm;

pub use coherence::{CoherenceModel, EmbeddingCoherenceProxy};
pub use cv::{
    cross_validate, dataset_fingerprint, group_ndcg, model_fingerprint, CvResult, DatasetSummary,
    TrainedModel, TrainingMetadata,
};
pub use dataset::{generate_training_set, read_dataset, relabel, write_dataset, LabeledPair};
pub use ranksvm::{train_pairwise, train_pairwise_with, TrainOptions, TrainReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which label the ranker is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Harmonic mean of promotion and coherence.
    #[default]
    L,
    /// Promotion label only.
    ROnly,
    /// Coherence label only.
    COnly,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::L => "l",
            LabelMode::ROnly => "r_only",
            LabelMode::COnly => "c_only",
        }
    }
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l" => Ok(LabelMode::L),
            "r_only" | "r" => Ok(LabelMode::ROnly),
            "c_only" | "c" => Ok(LabelMode::COnly),
            other => Err(Error::Config(format!("unknown label mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub label_mode: LabelMode,
    pub seed: u64,
    pub max_epochs: usize,
    pub tolerance: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            beta: 1.0,
            epsilon: 1e-4,
            c_grid: vec![0.001, 0.01, 0.1],
            folds: 5,
            label_mode: LabelMode::L,
            seed: 17,
            max_epochs: 200,
            tolerance: 1e-6,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.c_grid.is_empty() {
            return Err(Error::Config("c_grid is empty".into()));
        }
        if self.c_grid.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config(
                "c_grid values must be finite and non-negative".into(),
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn label(&self, r: f64, c: f64) -> f64 {
        match self.label_mode {
            LabelMode::L => aggregate_label(r, c, self.beta, self.epsilon),
            LabelMode::ROnly => r,
            LabelMode::COnly => c,
        }
    }

    pub(crate) fn train_options(&self) -> TrainOptions {
        TrainOptions {
            max_epochs: self.max_epochs,
            tolerance: self.tolerance,
            seed: self.seed,
            ..TrainOptions::default()
        }
    }
}

/// Positions gained by the modified document: `max(0, rank_cur − rank_next)`.
pub fn promotion_label(rank_cur: usize, rank_next: usize, n: usize) -> Result<u32> {
    for rank in [rank_cur, rank_next] {
        if rank == 0 || rank > n {
            return Err(Error::RankOutOfRange { rank, n });
        }
    }
    Ok(rank_cur.saturating_sub(rank_next) as u32)
}

/// Smoothed weighted harmonic mean `(1+β²)rc / (r + β²c + ε)`.
pub fn aggregate_label(r: f64, c: f64, beta: f64, epsilon: f64) -> f64 {
    let b2 = beta * beta;
    let denom = r + b2 * c + epsilon;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + b2) * r * c / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn promotion_examples() {
        assert_eq!(promotion_label(5, 1, 5).unwrap(), 4);
        assert_eq!(promotion_label(2, 2, 5).unwrap(), 0);
        assert_eq!(promotion_label(2, 4, 5).unwrap(), 0);
        assert!(promotion_label(0, 1, 5).is_err());
        assert!(promotion_label(3, 6, 5).is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_label(0.0, 3.0, 1.0, 1e-4), 0.0);
        assert!((aggregate_label(4.0, 4.0, 1.0, 1e-4) - 32.0 / 8.0001).abs() < 1e-12);
        assert!((aggregate_label(4.0, 2.0, 1.0, 1e-4) - 16.0 / 6.0001).abs() < 1e-12);
    }

    #[test]
    fn label_modes() {
        let mut cfg = TrainingConfig::default();
        assert!((cfg.label(4.0, 2.0) - 16.0 / 6.0001).abs() < 1e-12);
        cfg.label_mode = LabelMode::ROnly;
        assert_eq!(cfg.label(4.0, 2.0), 4.0);
        cfg.label_mode = LabelMode::COnly;
        assert_eq!(cfg.label(4.0, 2.0), 2.0);
        assert_eq!("r_only".parse::<LabelMode>().unwrap(), LabelMode::ROnly);
        assert!("x".parse::<LabelMode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = TrainingConfig {
            folds: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig {
            c_grid: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn aggregate_in_range_and_monotone(r in 0.0f64..4.0, c in 0.0f64..4.0, dr in 0.0f64..1.0, dc in 0.0f64..1.0) {
            let l = aggregate_label(r, c, 1.0, 1e-4);
            prop_assert!((0.0..=4.0).contains(&l));
            prop_assert!(aggregate_label(r + dr, c, 1.0, 1e-4) >= l - 1e-12);
            prop_assert!(aggregate_label(r, c + dc, 1.0, 1e-4) >= l - 1e-12);
            prop_assert!((aggregate_label(c, r, 1.0, 1e-4) - l).abs() < 1e-12);
        }
    }
}
