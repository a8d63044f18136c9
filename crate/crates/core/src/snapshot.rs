//! Line-delimited snapshot files: one query and its ranking history per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bot::{HistoryRecord, RankingHistory};
use crate::engine::Query;
use crate::error::{Error, Result};
use crate::text::{CorpusStats, CorpusStatsBuilder};

#[derive(Debug, Clone)]
pub struct QuerySnapshot {
    pub query: Query,
    pub history: RankingHistory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuerySnapshotRecord {
    pub query: Query,
    pub history: HistoryRecord,
}

impl QuerySnapshot {
    pub fn to_record(&self) -> QuerySnapshotRecord {
        QuerySnapshotRecord {
            query: self.query.clone(),
            history: self.history.to_record(),
        }
    }

    pub fn from_record(record: QuerySnapshotRecord, term_cap: usize) -> Result<Self> {
        record.query.validate()?;
        if record.history.query_id != record.query.id {
            return Err(Error::Config(format!(
                "history for `{}` attached to query `{}`",
                record.history.query_id, record.query.id
            )));
        }
        Ok(QuerySnapshot {
            query: record.query,
            history: RankingHistory::from_record(record.history, term_cap)?,
        })
    }
}

pub fn read_snapshots<R: BufRead>(reader: R, term_cap: usize) -> Result<Vec<QuerySnapshot>> {
    read_jsonl::<QuerySnapshotRecord, _>(reader)?
        .into_iter()
        .map(|r| QuerySnapshot::from_record(r, term_cap))
        .collect()
}

pub fn write_snapshots<W: Write>(snapshots: &[QuerySnapshot], out: W) -> Result<()> {
    write_jsonl(snapshots.iter().map(QuerySnapshot::to_record), out)
}

/// Adds every document and query of `snapshots` to a stats builder.
pub fn add_to_stats(builder: &mut CorpusStatsBuilder, snapshots: &[QuerySnapshot]) {
    for s in snapshots {
        let mut docs: Vec<_> = s.history.documents().collect();
        docs.sort_by(|a, b| a.id().cmp(b.id()));
        for d in docs {
            builder.add_document(d.text());
        }
        builder.add_query(&s.query.text);
    }
}

pub fn stats_for(
    snapshots: &[QuerySnapshot],
    stopwords: std::collections::HashSet<String>,
) -> CorpusStats {
    let mut b = CorpusStats::builder();
    add_to_stats(&mut b, snapshots);
    b.stopwords(stopwords);
    b.build()
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T, I, W>(items: I, mut out: W) -> Result<()>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
    W: Write,
{
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
