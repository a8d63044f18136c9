//! Append-only event log, one JSON record per line and one file per
//! competition. A competition's state is a fold over its log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rankpromo::arena::CompetitionSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        spec: CompetitionSpec,
        /// Player id to sha256 of the session token.
        token_hashes: BTreeMap<String, String>,
        pseudonyms: BTreeMap<String, String>,
    },
    Submitted {
        round: usize,
        player: String,
        text: String,
    },
    Advanced {
        round: usize,
        forced: bool,
        /// Document ids best first, checked on replay.
        ranking: Vec<String>,
    },
}

pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn create(dir: &Path, id: &str) -> std::io::Result<EventLog> {
        let path = dir.join(format!("{id}.jsonl"));
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)?;
        Ok(EventLog { path, file })
    }

    /// Opens an existing log for appending and returns its events. A torn
    /// final line left by a crash is cut off first.
    pub fn open_existing(path: &Path) -> std::io::Result<(EventLog, Vec<Event>)> {
        let bytes = std::fs::read(path)?;
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let file = OpenOptions::new().append(true).open(path)?;
        if keep < bytes.len() {
            file.set_len(keep as u64)?;
        }
        let mut events = Vec::new();
        for (i, line) in bytes[..keep].split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let event = serde_json::from_slice(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", i + 1),
                )
            })?;
            events.push(event);
        }
        Ok((
            EventLog {
                path: path.to_path_buf(),
                file,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}
