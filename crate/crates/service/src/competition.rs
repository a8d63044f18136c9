use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rankpromo::arena::{CompetitionSpec, CompetitionState, Environment, StrategySpec};
use rankpromo::bot::PairModel;
use rankpromo::engine::Document;
use rankpromo::text::{segment_passages, EmbeddingStore};
use rankpromo::Error as CoreError;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::ApiError;
use crate::log::Event;

pub fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

/// Everything a competition needs from the server besides its own log.
#[derive(Clone)]
pub struct Resources {
    pub model: Option<Arc<PairModel>>,
    pub store: EmbeddingStore,
}

pub struct Competition {
    pub id: String,
    pub spec: CompetitionSpec,
    token_hashes: HashMap<String, String>,
    pseudonyms: BTreeMap<String, String>,
    running: Option<(CompetitionState, Environment)>,
    pending: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub id: String,
    pub query: QueryView,
    /// Completed rounds.
    pub round: usize,
    pub rounds: usize,
    pub status: &'static str,
    pub players: usize,
    pub human_players: usize,
    pub pending_submissions: usize,
    pub term_cap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryView {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub rank: usize,
    pub author: String,
    pub text: String,
    pub passages: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PastRanking {
    pub round: usize,
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingView {
    pub round: usize,
    pub entries: Vec<Entry>,
    pub history: Vec<PastRanking>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlayerRound {
    pub author: String,
    pub rank: usize,
    pub raw_promotion: Option<i64>,
    pub scaled_promotion: Option<f64>,
    pub quality_proxy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub players: Vec<PlayerRound>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub id: String,
    pub rounds: Vec<RoundReport>,
}

/// Read-only views of the completed rounds, rebuilt after every mutation.
#[derive(Debug, Clone)]
pub struct Views {
    pub summary: Summary,
    pub ranking: Option<RankingView>,
    pub report: Report,
    pub token_hashes: HashMap<String, String>,
    pub pseudonyms: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Accepted {
    pub round: usize,
    pub author: String,
    pub passages: Vec<String>,
    pub term_count: usize,
    pub term_cap: usize,
}

impl Competition {
    pub fn new(
        id: String,
        spec: CompetitionSpec,
        token_hashes: BTreeMap<String, String>,
        pseudonyms: BTreeMap<String, String>,
    ) -> Competition {
        Competition {
            id,
            spec,
            token_hashes: token_hashes.into_iter().map(|(p, h)| (h, p)).collect(),
            pseudonyms,
            running: None,
            pending: BTreeMap::new(),
        }
    }

    /// Rebuilds a competition from its log.
    pub fn replay(events: Vec<Event>, res: &Resources) -> Result<Competition, String> {
        let mut events = events.into_iter();
        let mut c = match events.next() {
            Some(Event::Created {
                id,
                spec,
                token_hashes,
                pseudonyms,
            }) => Competition::new(id, spec, token_hashes, pseudonyms),
            _ => return Err("log does not start with a creation record".into()),
        };
        for e in events {
            match e {
                Event::Created { .. } => return Err("duplicate creation record".into()),
                Event::Submitted {
                    round,
                    player,
                    text,
                } => {
                    if round != c.round() + 1 {
                        return Err(format!(
                            "submission for round {round} while round {} is open",
                            c.round() + 1
                        ));
                    }
                    c.pending.insert(player, text);
                }
                Event::Advanced {
                    round,
                    forced,
                    ranking,
                } => {
                    let got = c.advance(forced, res).map_err(|e| e.message)?;
                    if got.0 != round || got.1 != ranking {
                        return Err(format!("replayed round {round} disagrees with the log"));
                    }
                }
            }
        }
        Ok(c)
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.running.as_ref().map_or(0, |(s, _)| s.round_index())
    }

    fn finished(&self) -> bool {
        self.round() >= self.spec.rounds
    }

    fn humans(&self) -> impl Iterator<Item = &str> {
        self.spec
            .players
            .iter()
            .filter(|p| p.strategy == StrategySpec::Human)
            .map(|p| p.id.as_str())
    }

    pub fn player_for_token(&self, token: &str) -> Option<&str> {
        self.token_hashes
            .get(&hash_token(token))
            .map(String::as_str)
    }

    /// Validates a submission and returns the event to log. Nothing changes
    /// until [`Competition::apply_submission`].
    pub fn check_submission(&self, token: &str, text: &str) -> Result<(Event, Accepted), ApiError> {
        let player = self
            .player_for_token(token)
            .ok_or_else(|| ApiError::unauthorized("unknown session token"))?
            .to_string();
        if self.finished() {
            return Err(ApiError::conflict(
                "competition is finished; no round is open",
            ));
        }
        let round = self.round() + 1;
        let doc =
            Document::new("submission", player.clone(), text, self.spec.term_cap).map_err(|e| {
                match e {
                    CoreError::LengthCapExceeded { terms, cap, .. } => {
                        ApiError::unprocessable("length cap exceeded")
                            .with_details(vec![format!("{terms} terms, cap is {cap}")])
                    }
                    CoreError::NoPassages => ApiError::unprocessable("document is empty"),
                    other => ApiError::unprocessable(other.to_string()),
                }
            })?;
        let accepted = Accepted {
            round,
            author: self.pseudonyms[&player].clone(),
            passages: segment_passages(text).unwrap_or_default(),
            term_count: doc.term_count(),
            term_cap: self.spec.term_cap,
        };
        Ok((
            Event::Submitted {
                round,
                player,
                text: text.to_string(),
            },
            accepted,
        ))
    }

    pub fn apply_submission(&mut self, event: &Event) {
        if let Event::Submitted { player, text, .. } = event {
            self.pending.insert(player.clone(), text.clone());
        }
    }

    /// Runs the next round. Returns the new round number and ranking.
    pub fn advance(
        &mut self,
        forced: bool,
        res: &Resources,
    ) -> Result<(usize, Vec<String>), ApiError> {
        if self.finished() {
            return Err(ApiError::conflict("competition is finished"));
        }
        let missing: Vec<String> = self
            .humans()
            .filter(|h| !self.pending.contains_key(*h))
            .map(|h| self.pseudonyms[h].clone())
            .collect();
        if !missing.is_empty() && !forced {
            return Err(ApiError::conflict("waiting for submissions").with_details(missing));
        }
        match &mut self.running {
            None => {
                let pending = &self.pending;
                let config = self
                    .spec
                    .build(res.model.as_ref(), &|p| pending.get(p).cloned())
                    .map_err(|e| ApiError::conflict(e.to_string()))?;
                let env = Environment::for_competition(&config, res.store.clone());
                let state = CompetitionState::start(config, &env).map_err(ApiError::internal)?;
                self.running = Some((state, env));
            }
            Some((state, env)) => {
                state
                    .run_round(env, &self.pending)
                    .map_err(ApiError::internal)?;
            }
        }
        self.pending.clear();
        let (state, _) = self.running.as_ref().expect("running");
        let ranking = state.latest_ranking().map_err(ApiError::internal)?;
        Ok((state.round_index(), ranking.doc_ids.clone()))
    }

    fn author_of(&self, state: &CompetitionState, doc_id: &str) -> String {
        state
            .history()
            .document(doc_id)
            .ok()
            .and_then(|d| self.pseudonyms.get(d.author_id()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn views(&self) -> Views {
        let summary = Summary {
            id: self.id.clone(),
            query: QueryView {
                id: self.spec.query.id.clone(),
                text: self.spec.query.text.clone(),
            },
            round: self.round(),
            rounds: self.spec.rounds,
            status: if self.finished() { "finished" } else { "open" },
            players: self.spec.players.len(),
            human_players: self.humans().count(),
            pending_submissions: self.pending.len(),
            term_cap: self.spec.term_cap,
        };
        let mut report = Report {
            id: self.id.clone(),
            rounds: Vec::new(),
        };
        let mut ranking = None;
        if let Some((state, _)) = &self.running {
            let history: Vec<PastRanking> = state
                .history()
                .rankings()
                .iter()
                .map(|r| PastRanking {
                    round: r.round_index,
                    authors: r.doc_ids.iter().map(|d| self.author_of(state, d)).collect(),
                })
                .collect();
            if let Ok(current) = state.latest_ranking() {
                let entries = current
                    .doc_ids
                    .iter()
                    .enumerate()
                    .filter_map(|(i, id)| {
                        let d = state.history().document(id).ok()?;
                        Some(Entry {
                            rank: i + 1,
                            author: self.author_of(state, id),
                            text: d.text().to_string(),
                            passages: d.passages().to_vec(),
                        })
                    })
                    .collect();
                ranking = Some(RankingView {
                    round: current.round_index,
                    entries,
                    history,
                });
            }
            report.rounds = state
                .metrics()
                .iter()
                .map(|m| {
                    let mut players: Vec<PlayerRound> = m
                        .players
                        .iter()
                        .map(|p| PlayerRound {
                            author: self.pseudonyms.get(&p.player).cloned().unwrap_or_default(),
                            rank: p.rank,
                            raw_promotion: p.raw_promotion,
                            scaled_promotion: p.scaled_promotion,
                            quality_proxy: p.quality_proxy,
                        })
                        .collect();
                    players.sort_by_key(|p| p.rank);
                    RoundReport {
                        round: m.round,
                        players,
                    }
                })
                .collect();
        }
        Views {
            summary,
            ranking,
            report,
            token_hashes: self.token_hashes.clone(),
            pseudonyms: self.pseudonyms.clone(),
        }
    }
}
