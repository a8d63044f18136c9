use std::collections::HashSet;

use crate::engine::features::{stopword_ratio, term_entropy};
use crate::engine::Document;
use crate::error::{Error, Result};
use crate::text::{tokenize, CorpusStats};

/// Raw and scaled promotion between consecutive rankings of `n` documents.
///
/// Returns `None` for documents that held rank 1, which have nothing to
/// gain. Promotions are scaled by `rank_prev − 1`, demotions by
/// `n − rank_prev`.
pub fn raw_and_scaled_promotion(
    rank_prev: usize,
    rank_next: usize,
    n: usize,
) -> Result<Option<(i64, f64)>> {
    for rank in [rank_prev, rank_next] {
        if rank == 0 || rank > n {
            return Err(Error::RankOutOfRange { rank, n });
        }
    }
    if rank_prev == 1 {
        return Ok(None);
    }
    let raw = rank_prev as i64 - rank_next as i64;
    let scaled = if raw >= 0 {
        raw as f64 / (rank_prev - 1) as f64
    } else {
        raw as f64 / (n - rank_prev) as f64
    };
    Ok(Some((raw, scaled)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityBreakdown {
    pub duplicate_ratio: f64,
    pub stopword_starvation: f64,
    pub entropy_collapse: f64,
}

impl QualityBreakdown {
    pub fn proxy(&self) -> f64 {
        1.0 - self
            .duplicate_ratio
            .max(self.stopword_starvation)
            .max(self.entropy_collapse)
    }
}

const MIN_STOPWORD_RATIO: f64 = 0.1;
const MIN_NORMALIZED_ENTROPY: f64 = 0.6;

pub fn quality_breakdown(doc: &Document, stats: &CorpusStats) -> QualityBreakdown {
    let passages = doc.passages();
    let distinct: HashSet<Vec<String>> = passages.iter().map(|p| tokenize(p)).collect();
    let duplicate_ratio = (passages.len() - distinct.len()) as f64 / passages.len().max(1) as f64;

    let terms = doc.terms();
    let stopword_starvation = if stats.stopwords().is_empty() {
        0.0
    } else {
        ((MIN_STOPWORD_RATIO - stopword_ratio(&terms, stats)) / MIN_STOPWORD_RATIO).clamp(0.0, 1.0)
    };
    let entropy_collapse = if terms.len() <= 1 {
        1.0
    } else {
        let h = term_entropy(&terms) / (terms.len() as f64).ln();
        ((MIN_NORMALIZED_ENTROPY - h) / MIN_NORMALIZED_ENTROPY).clamp(0.0, 1.0)
    };
    QualityBreakdown {
        duplicate_ratio,
        stopword_starvation,
        entropy_collapse,
    }
}

/// Heuristic stand-in for human quality judgments, in `[0, 1]`.
pub fn quality_proxy(doc: &Document, stats: &CorpusStats) -> f64 {
    quality_breakdown(doc, stats).proxy()
}
