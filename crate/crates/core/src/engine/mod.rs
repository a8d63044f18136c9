//! The search engine: documents, queries, rankings and the ranking
//! functions. Nothing in here is visible to the bot except the rankings it
//! induces.

pub(crate) mod features;
mod model;
mod ndcg;

pub use features::{extract_doc_features, DocFeatureVector, DOC_FEATURE_NAMES};
pub use model::{lm_dirichlet_score, rank_documents, EngineModel, RankingFunction, DEFAULT_MU};
pub use ndcg::ndcg_at_k;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{segment_passages, tokenize};

/// Default cap on document length, in terms.
pub const DEFAULT_TERM_CAP: usize = 150;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_description: Option<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let q = Query {
            id: id.into(),
            text: text.into(),
            topic_description: None,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.topic_description = Some(description.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if tokenize(&self.text).is_empty() {
            return Err(Error::EmptyQuery(self.id.clone()));
        }
        Ok(())
    }

    pub fn terms(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

/// A ranked unit: text split into ordered passages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: String,
    author_id: String,
    text: String,
    passages: Vec<String>,
}

/// Wire form of a document; passages are derived on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub author_id: String,
    pub text: String,
}

impl Document {
    /// Segments `text` into passages and enforces the term cap.
    pub fn new(
        id: impl Into<String>,
        author_id: impl Into<String>,
        text: impl Into<String>,
        term_cap: usize,
    ) -> Result<Self> {
        let text = text.into();
        let passages = segment_passages(&text)?;
        Self::checked(id.into(), author_id.into(), text, passages, term_cap)
    }

    /// Builds a document from explicit passages, joined by single spaces.
    pub fn from_passages(
        id: impl Into<String>,
        author_id: impl Into<String>,
        passages: Vec<String>,
        term_cap: usize,
    ) -> Result<Self> {
        if passages.is_empty() {
            return Err(Error::NoPassages);
        }
        let text = passages.join(" ");
        Self::checked(id.into(), author_id.into(), text, passages, term_cap)
    }

    fn checked(
        id: String,
        author_id: String,
        text: String,
        passages: Vec<String>,
        term_cap: usize,
    ) -> Result<Self> {
        let terms = tokenize(&text).len();
        if terms > term_cap {
            return Err(Error::LengthCapExceeded {
                id,
                terms,
                cap: term_cap,
            });
        }
        Ok(Document {
            id,
            author_id,
            text,
            passages,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn author_id(&self) -> &str {
        &self.author_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn passages(&self) -> &[String] {
        &self.passages
    }

    pub fn terms(&self) -> Vec<String> {
        tokenize(&self.text)
    }

    pub fn term_count(&self) -> usize {
        self.terms().len()
    }

    /// Same content under a different id.
    pub fn with_id(&self, id: impl Into<String>) -> Document {
        Document {
            id: id.into(),
            ..self.clone()
        }
    }

    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            id: self.id.clone(),
            author_id: self.author_id.clone(),
            text: self.text.clone(),
        }
    }

    pub fn from_record(record: DocumentRecord, term_cap: usize) -> Result<Self> {
        Document::new(record.id, record.author_id, record.text, term_cap)
    }
}

/// An induced ranking; position 1 is the best.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub round_index: usize,
    pub doc_ids: Vec<String>,
}

impl Ranking {
    pub fn new(
        query_id: impl Into<String>,
        round_index: usize,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Ranking {
            query_id: query_id.into(),
            round_index,
            doc_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// 1-based rank of `doc_id`.
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id).map(|i| i + 1)
    }

    pub fn top(&self) -> Option<&str> {
        self.doc_ids.first().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_requires_terms() {
        assert!(Query::new("q", "  ?? ").is_err());
        assert_eq!(
            Query::new("q", "Hoof care").unwrap().terms(),
            ["hoof", "care"]
        );
    }

    #[test]
    fn document_enforces_cap() {
        let err = Document::new("d", "a", "one two three.", 2).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthCapExceeded {
                terms: 3,
                cap: 2,
                ..
            }
        ));
        let d = Document::new("d", "a", "One two. Three!", 3).unwrap();
        assert_eq!(d.passages(), ["One two.", "Three!"]);
        assert_eq!(d.term_count(), 3);
    }

    #[test]
    fn ranking_positions() {
        let r = Ranking::new("q", 1, vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(r.rank_of("y"), Some(2));
        assert_eq!(r.rank_of("z"), None);
        assert!(Ranking::new("q", 1, vec!["x".into(), "x".into()]).is_err());
    }
}
