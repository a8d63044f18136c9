use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::{lm_dirichlet_score, DEFAULT_MU};
use super::{Document, Query};
use crate::error::Result;
use crate::text::CorpusStats;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

pub const DOC_FEATURE_NAMES: [&str; 9] = [
    "query_term_coverage",
    "sum_tf",
    "sum_tfidf",
    "lm_dirichlet_score",
    "bm25_score",
    "stopword_ratio",
    "stopword_coverage",
    "term_entropy",
    "doc_length",
];

/// Query-dependent and quality features of one document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocFeatureVector {
    pub query_term_coverage: f64,
    pub sum_tf: f64,
    pub sum_tfidf: f64,
    pub lm_dirichlet_score: f64,
    pub bm25_score: f64,
    pub stopword_ratio: f64,
    pub stopword_coverage: f64,
    pub term_entropy: f64,
    pub doc_length: f64,
}

impl DocFeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "query_term_coverage" => self.query_term_coverage,
            "sum_tf" => self.sum_tf,
            "sum_tfidf" => self.sum_tfidf,
            "lm_dirichlet_score" => self.lm_dirichlet_score,
            "bm25_score" => self.bm25_score,
            "stopword_ratio" => self.stopword_ratio,
            "stopword_coverage" => self.stopword_coverage,
            "term_entropy" => self.term_entropy,
            "doc_length" => self.doc_length,
            _ => return None,
        })
    }
}

pub(crate) fn term_counts(terms: &[String]) -> HashMap<&str, usize> {
    let mut tf = HashMap::new();
    for t in terms {
        *tf.entry(t.as_str()).or_insert(0) += 1;
    }
    tf
}

/// Shannon entropy (nats) of the term distribution.
pub(crate) fn term_entropy(terms: &[String]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let n = terms.len() as f64;
    let h: f64 = term_counts(terms)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

pub(crate) fn stopword_ratio(terms: &[String], stats: &CorpusStats) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    terms.iter().filter(|t| stats.is_stopword(t)).count() as f64 / terms.len() as f64
}

pub fn extract_doc_features(
    doc: &Document,
    query: &Query,
    stats: &CorpusStats,
) -> Result<DocFeatureVector> {
    let terms = doc.terms();
    let tf = term_counts(&terms);
    let qterms = query.terms();
    let distinct_q: HashSet<&str> = qterms.iter().map(String::as_str).collect();
    let dl = terms.len() as f64;

    let covered = distinct_q.iter().filter(|t| tf.contains_key(*t)).count();
    let query_term_coverage = covered as f64 / distinct_q.len().max(1) as f64;

    let mut sum_tf = 0.0;
    let mut sum_tfidf = 0.0;
    let mut bm25 = 0.0;
    let avgdl = stats.avg_doc_length().max(1.0);
    let n = stats.doc_count() as f64;
    for t in &qterms {
        let f = tf.get(t.as_str()).copied().unwrap_or(0) as f64;
        sum_tf += f;
        sum_tfidf += f * stats.idf(t);
        if f > 0.0 {
            let df = stats.doc_freq(t) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            bm25 +=
                idf * f * (BM25_K1 + 1.0) / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl));
        }
    }

    let stopwords = stats.stopwords();
    let stopword_coverage = if stopwords.is_empty() {
        0.0
    } else {
        stopwords
            .iter()
            .filter(|s| tf.contains_key(s.as_str()))
            .count() as f64
            / stopwords.len() as f64
    };

    Ok(DocFeatureVector {
        query_term_coverage,
        sum_tf,
        sum_tfidf,
        lm_dirichlet_score: lm_dirichlet_score(doc, query, stats, DEFAULT_MU)?,
        bm25_score: bm25,
        stopword_ratio: stopword_ratio(&terms, stats),
        stopword_coverage,
        term_entropy: term_entropy(&terms),
        doc_length: dl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_stopwords;

    fn fixture(docs: &[&str], stop: &str, query: &str) -> CorpusStats {
        let mut b = CorpusStats::builder();
        for d in docs {
            b.add_document(d);
        }
        b.add_query(query).stopwords(parse_stopwords(stop));
        b.build()
    }

    #[test]
    fn doc_without_query_terms() {
        let stats = fixture(&["x y z", "a b"], "", "a");
        let doc = Document::new("d", "u", "x y z", 150).unwrap();
        let f = extract_doc_features(&doc, &Query::new("q", "a").unwrap(), &stats).unwrap();
        assert_eq!(f.query_term_coverage, 0.0);
        assert_eq!(f.sum_tf, 0.0);
        assert_eq!(f.bm25_score, 0.0);
    }

    #[test]
    fn single_term_doc_has_zero_entropy() {
        let stats = fixture(&["a a a a"], "", "a");
        let doc = Document::new("d", "u", "a a a a", 150).unwrap();
        let f = extract_doc_features(&doc, &Query::new("q", "a").unwrap(), &stats).unwrap();
        assert_eq!(f.term_entropy, 0.0);
        assert_eq!(f.query_term_coverage, 1.0);
        assert_eq!(f.sum_tf, 4.0);
    }

    #[test]
    fn stopword_ratio_by_hand() {
        let stats = fixture(&["a a b"], "b", "a");
        let doc = Document::new("d", "u", "a a b", 150).unwrap();
        let f = extract_doc_features(&doc, &Query::new("q", "a").unwrap(), &stats).unwrap();
        assert!((f.stopword_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(f.stopword_coverage, 1.0);
        assert_eq!(f.doc_length, 3.0);
        // entropy of (2/3, 1/3)
        let h = -(2.0 / 3.0f64) * (2.0 / 3.0f64).ln() - (1.0 / 3.0f64) * (1.0 / 3.0f64).ln();
        assert!((f.term_entropy - h).abs() < 1e-12);
    }

    #[test]
    fn feature_lookup_by_name() {
        let stats = fixture(&["a b"], "", "a");
        let doc = Document::new("d", "u", "a b", 150).unwrap();
        let f = extract_doc_features(&doc, &Query::new("q", "a").unwrap(), &stats).unwrap();
        for name in DOC_FEATURE_NAMES {
            assert!(f.get(name).is_some(), "{name}");
        }
        assert!(f.get("nope").is_none());
    }
}
