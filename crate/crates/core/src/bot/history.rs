use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Document, DocumentRecord, Ranking};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// The rankings observed for one query, with every ranked document version.
///
/// Rankings are stored oldest first; [`RankingHistory::current`] is the most
/// recent one.
#[derive(Debug, Clone, Default)]
pub struct RankingHistory {
    query_id: String,
    rankings: Vec<Ranking>,
    documents: HashMap<String, Document>,
}

impl RankingHistory {
    pub fn new(query_id: impl Into<String>) -> Self {
        RankingHistory {
            query_id: query_id.into(),
            ..Default::default()
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    /// Appends a ranking. Every ranked id must resolve to `docs` or to a
    /// document already in the history.
    pub fn push(
        &mut self,
        ranking: Ranking,
        docs: impl IntoIterator<Item = Document>,
    ) -> Result<()> {
        for d in docs {
            self.documents.insert(d.id().to_string(), d);
        }
        if let Some(missing) = ranking
            .doc_ids
            .iter()
            .find(|id| !self.documents.contains_key(*id))
        {
            return Err(Error::UnknownDocument(missing.clone()));
        }
        self.rankings.push(ranking);
        Ok(())
    }

    /// Number of rankings observed (`p`).
    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    pub fn current(&self) -> Result<&Ranking> {
        self.rankings.last().ok_or(Error::EmptyHistory)
    }

    /// Rankings from the current one backwards: `π₋₁, π₋₂, …, π₋ₚ`.
    pub fn recent(&self) -> impl Iterator<Item = &Ranking> {
        self.rankings.iter().rev()
    }

    /// Rankings oldest first.
    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    pub fn document(&self, id: &str) -> Result<&Document> {
        self.documents
            .get(id)
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    /// Documents of the current ranking, in rank order.
    pub fn current_documents(&self) -> Result<Vec<&Document>> {
        self.current()?
            .doc_ids
            .iter()
            .map(|id| self.document(id))
            .collect()
    }

    /// A copy keeping only the oldest `rounds` rankings.
    pub fn truncated(&self, rounds: usize) -> RankingHistory {
        let rankings: Vec<Ranking> = self.rankings.iter().take(rounds).cloned().collect();
        let keep: HashSet<&String> = rankings.iter().flat_map(|r| r.doc_ids.iter()).collect();
        let documents = self
            .documents
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(id, d)| (id.clone(), d.clone()))
            .collect();
        RankingHistory {
            query_id: self.query_id.clone(),
            rankings,
            documents,
        }
    }

    pub fn to_record(&self) -> HistoryRecord {
        let mut documents: Vec<DocumentRecord> =
            self.documents.values().map(Document::to_record).collect();
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        HistoryRecord {
            query_id: self.query_id.clone(),
            rankings: self.rankings.clone(),
            documents,
        }
    }

    pub fn from_record(record: HistoryRecord, term_cap: usize) -> Result<Self> {
        let mut h = RankingHistory::new(record.query_id);
        let docs = record
            .documents
            .into_iter()
            .map(|d| Document::from_record(d, term_cap))
            .collect::<Result<Vec<_>>>()?;
        let mut docs = Some(docs);
        for r in record.rankings {
            h.push(r, docs.take().unwrap_or_default())?;
        }
        Ok(h)
    }
}

/// Serialized [`RankingHistory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub query_id: String,
    pub rankings: Vec<Ranking>,
    pub documents: Vec<DocumentRecord>,
}

/// A passage available for copying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolPassage {
    pub doc_id: String,
    /// Rank of the source document in the current ranking.
    pub rank: usize,
    /// Position of the passage in its document.
    pub index: usize,
    pub text: String,
}

/// All passages of documents ranked strictly above `d_cur_id` in the current
/// ranking, in rank-then-position order. Passages whose term sequence equals
/// one of `d_cur`'s own passages are left out.
pub fn build_candidate_pool(history: &RankingHistory, d_cur_id: &str) -> Result<Vec<PoolPassage>> {
    let current = history.current()?;
    let rank = current
        .rank_of(d_cur_id)
        .ok_or_else(|| Error::UnknownDocument(d_cur_id.to_string()))?;
    if rank == 1 {
        return Err(Error::NothingToMimic(d_cur_id.to_string()));
    }
    let d_cur = history.document(d_cur_id)?;
    let own: HashSet<Vec<String>> = d_cur.passages().iter().map(|p| tokenize(p)).collect();

    let mut pool = Vec::new();
    for (i, id) in current.doc_ids[..rank - 1].iter().enumerate() {
        let doc = history.document(id)?;
        for (j, p) in doc.passages().iter().enumerate() {
            if own.contains(&tokenize(p)) {
                continue;
            }
            pool.push(PoolPassage {
                doc_id: id.clone(),
                rank: i + 1,
                index: j,
                text: p.clone(),
            });
        }
    }
    Ok(pool)
}
