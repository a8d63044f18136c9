use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{tokenize, TermVector};

/// Collection statistics for IDF and language-model smoothing.
///
/// Built once and then read-only. `doc_freq[t] <= doc_count` and
/// `collection_length == Σ collection_term_freq` hold by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StatsRecord", from = "StatsRecord")]
pub struct CorpusStats {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
    collection_term_freq: HashMap<String, usize>,
    collection_length: usize,
    doc_length_total: usize,
    stopwords: HashSet<String>,
}

impl CorpusStats {
    pub fn builder() -> CorpusStatsBuilder {
        CorpusStatsBuilder::default()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn collection_term_freq(&self, term: &str) -> usize {
        self.collection_term_freq.get(term).copied().unwrap_or(0)
    }

    pub fn collection_length(&self) -> usize {
        self.collection_length
    }

    /// Maximum-likelihood collection probability p(t|C).
    pub fn collection_prob(&self, term: &str) -> f64 {
        if self.collection_length == 0 {
            return 0.0;
        }
        self.collection_term_freq(term) as f64 / self.collection_length as f64
    }

    /// `ln(N / df)` with a document-frequency floor of 1.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq(term).max(1);
        (self.doc_count as f64 / df as f64).ln().max(0.0)
    }

    /// Mean length of the documents added with [`CorpusStatsBuilder::add_document`].
    pub fn avg_doc_length(&self) -> f64 {
        if self.doc_count == 0 {
            return 0.0;
        }
        self.doc_length_total as f64 / self.doc_count as f64
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }
}

/// Serialized form with sorted keys, so that files are byte-stable.
#[derive(Serialize, Deserialize)]
struct StatsRecord {
    doc_count: usize,
    collection_length: usize,
    doc_length_total: usize,
    doc_freq: BTreeMap<String, usize>,
    collection_term_freq: BTreeMap<String, usize>,
    stopwords: BTreeSet<String>,
}

impl From<CorpusStats> for StatsRecord {
    fn from(s: CorpusStats) -> Self {
        StatsRecord {
            doc_count: s.doc_count,
            collection_length: s.collection_length,
            doc_length_total: s.doc_length_total,
            doc_freq: s.doc_freq.into_iter().collect(),
            collection_term_freq: s.collection_term_freq.into_iter().collect(),
            stopwords: s.stopwords.into_iter().collect(),
        }
    }
}

impl From<StatsRecord> for CorpusStats {
    fn from(r: StatsRecord) -> Self {
        CorpusStats {
            doc_count: r.doc_count,
            collection_length: r.collection_length,
            doc_length_total: r.doc_length_total,
            doc_freq: r.doc_freq.into_iter().collect(),
            collection_term_freq: r.collection_term_freq.into_iter().collect(),
            stopwords: r.stopwords.into_iter().collect(),
        }
    }
}

#[derive(Debug, Default)]
pub struct CorpusStatsBuilder {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
    collection_term_freq: HashMap<String, usize>,
    collection_length: usize,
    doc_length_total: usize,
    stopwords: HashSet<String>,
    seen_docs: HashSet<String>,
}

impl CorpusStatsBuilder {
    /// Adds a document. Documents are deduplicated by exact text so that the
    /// same version appearing in several rounds counts once.
    pub fn add_document(&mut self, text: &str) -> &mut Self {
        if !self.seen_docs.insert(text.to_string()) {
            return self;
        }
        let terms = tokenize(text);
        self.doc_count += 1;
        self.doc_length_total += terms.len();
        let distinct: HashSet<&String> = terms.iter().collect();
        for t in distinct {
            *self.doc_freq.entry(t.clone()).or_insert(0) += 1;
        }
        self.add_to_collection(&terms);
        self
    }

    /// Adds query text to the collection model (not to document counts), so
    /// every query term has a non-zero collection probability.
    pub fn add_query(&mut self, text: &str) -> &mut Self {
        let terms = tokenize(text);
        self.add_to_collection(&terms);
        self
    }

    pub fn stopwords(&mut self, stopwords: HashSet<String>) -> &mut Self {
        self.stopwords = stopwords;
        self
    }

    pub fn build(&mut self) -> CorpusStats {
        let b = std::mem::take(self);
        CorpusStats {
            doc_count: b.doc_count.max(1),
            doc_freq: b.doc_freq,
            collection_term_freq: b.collection_term_freq,
            collection_length: b.collection_length,
            doc_length_total: b.doc_length_total,
            stopwords: b.stopwords,
        }
    }

    fn add_to_collection(&mut self, terms: &[String]) {
        for t in terms {
            *self.collection_term_freq.entry(t.clone()).or_insert(0) += 1;
        }
        self.collection_length += terms.len();
    }
}

/// TF.IDF vector of `text`: `tf(t) · ln(N / max(df(t), 1))`.
pub fn tfidf_vector(text: &str, stats: &CorpusStats) -> TermVector {
    let mut tf: HashMap<String, usize> = HashMap::new();
    for t in tokenize(text) {
        *tf.entry(t).or_insert(0) += 1;
    }
    TermVector::from_weights(tf.into_iter().map(|(t, n)| {
        let w = n as f64 * stats.idf(&t);
        (t, w)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_with(docs: &[&str]) -> CorpusStats {
        let mut b = CorpusStats::builder();
        for d in docs {
            b.add_document(d);
        }
        b.build()
    }

    #[test]
    fn serialized_form_is_sorted_and_round_trips() {
        let mut b = CorpusStats::builder();
        b.add_document("zeta alpha beta. Alpha gamma.")
            .add_query("omega");
        b.stopwords(["the".to_string(), "a".to_string()].into_iter().collect());
        let s = b.build();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.find("\"alpha\"").unwrap() < json.find("\"zeta\"").unwrap());
        let back: CorpusStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn tfidf_hand_example() {
        // N = 4, df(a) = 2, df(b) = 1
        let stats = stats_with(&["a b", "a", "c", "d"]);
        assert_eq!(stats.doc_count(), 4);
        let v = tfidf_vector("a a b", &stats);
        assert!((v.get("a") - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((v.get("b") - 4f64.ln()).abs() < 1e-12);
        assert!((v.get("a") - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn ubiquitous_term_is_dropped() {
        let stats = stats_with(&["x a", "x b", "x c"]);
        let v = tfidf_vector("x a", &stats);
        assert_eq!(v.get("x"), 0.0);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn unseen_term_uses_df_floor() {
        let stats = stats_with(&["a", "b"]);
        let v = tfidf_vector("zzz", &stats);
        assert!((v.get("zzz") - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_text_gives_empty_vector() {
        let stats = stats_with(&["a"]);
        assert!(tfidf_vector("", &stats).is_empty());
    }

    #[test]
    fn collection_invariants() {
        let mut b = CorpusStats::builder();
        b.add_document("a a b").add_document("b c").add_query("d");
        let stats = b.build();
        let total: usize = ["a", "b", "c", "d"]
            .iter()
            .map(|t| stats.collection_term_freq(t))
            .sum();
        assert_eq!(total, stats.collection_length());
        assert!(stats.doc_freq("b") <= stats.doc_count());
        assert_eq!(stats.doc_freq("d"), 0);
        assert!(stats.collection_prob("d") > 0.0);
        assert_eq!(stats.avg_doc_length(), 2.5);
    }
}
