//! Multi-round ranking competitions and their evaluation.
//!
//! Each round every player submits a document, the engine ranks the
//! submissions, and per-player promotion and quality-proxy metrics are
//! recorded. Players are the bot, a static baseline, a scripted author that
//! copies from the top document, planted replays and (through the service)
//! humans.

mod metrics;
mod offline;
mod report;
mod significance;
mod spec;

pub use metrics::{quality_breakdown, quality_proxy, raw_and_scaled_promotion, QualityBreakdown};
pub use offline::{
    offline_eval, Comparison, OfflineCell, OfflineConfig, OfflineQuery, OfflineReport, SkippedCell,
    VariantOutcome, VariantSummary, STATIC, STUDENT,
};
pub use report::{
    render_offline_table, render_series, render_table1, render_weights, summarize, ClassSummary,
    SeriesRecord,
};
pub use significance::{bonferroni, permutation_test};
pub use spec::{CompetitionSpec, PlayerEntry, StrategySpec};

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bot::{modify_document, BotConfig, DecisionAudit, PairModel, RankingHistory};
use crate::engine::{rank_documents, Document, EngineModel, Query, Ranking, DEFAULT_TERM_CAP};
use crate::error::{Error, Result};
use crate::text::{tokenize, CorpusStats, EmbeddingStore};

/// Collection statistics and embeddings shared by every competition.
#[derive(Debug, Clone)]
pub struct Environment {
    pub stats: CorpusStats,
    pub store: EmbeddingStore,
}

#[derive(Debug, Clone)]
pub enum Strategy {
    Bot(Arc<PairModel>),
    Static,
    MimicTop,
    /// Replays a fixed sequence of versions; version `k` is submitted in
    /// round `k + 1` and the last one is reused once the sequence runs out.
    Planted(Vec<String>),
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Bot,
    Static,
    MimicTop,
    Planted,
    Human,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Bot => "bot",
            StrategyKind::Static => "static",
            StrategyKind::MimicTop => "mimic_top",
            StrategyKind::Planted => "planted",
            StrategyKind::Human => "human",
        }
    }
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Bot(_) => StrategyKind::Bot,
            Strategy::Static => StrategyKind::Static,
            Strategy::MimicTop => StrategyKind::MimicTop,
            Strategy::Planted(_) => StrategyKind::Planted,
            Strategy::Human => StrategyKind::Human,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlayerSpec {
    pub id: String,
    pub initial_text: String,
    pub strategy: Strategy,
}

impl PlayerSpec {
    pub fn new(id: impl Into<String>, initial_text: impl Into<String>, strategy: Strategy) -> Self {
        PlayerSpec {
            id: id.into(),
            initial_text: initial_text.into(),
            strategy,
        }
    }

    pub fn planted(id: impl Into<String>, versions: Vec<String>) -> Result<Self> {
        let first = versions
            .first()
            .cloned()
            .ok_or_else(|| Error::Config("planted player needs at least one version".into()))?;
        Ok(PlayerSpec::new(id, first, Strategy::Planted(versions)))
    }
}

#[derive(Debug, Clone)]
pub struct CompetitionConfig {
    pub query: Query,
    pub players: Vec<PlayerSpec>,
    pub rounds: usize,
    pub engine: EngineModel,
    pub seed: u64,
    pub term_cap: usize,
    pub bot: BotConfig,
}

impl CompetitionConfig {
    pub fn new(query: Query, players: Vec<PlayerSpec>, rounds: usize, engine: EngineModel) -> Self {
        CompetitionConfig {
            query,
            players,
            rounds,
            engine,
            seed: 0,
            term_cap: DEFAULT_TERM_CAP,
            bot: BotConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.query.validate()?;
        self.engine.validate()?;
        if self.players.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 players, got {}",
                self.players.len()
            )));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.players {
            if p.id.is_empty() || p.id.contains('@') {
                return Err(Error::Config(format!("invalid player id `{}`", p.id)));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(())
    }
}

pub fn document_id(player: &str, round: usize) -> String {
    format!("{player}@r{round}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerMetrics {
    pub player: String,
    pub kind: StrategyKind,
    pub doc_id: String,
    pub rank: usize,
    /// `None` in the first round and for the previous rank-1 holder.
    pub raw_promotion: Option<i64>,
    pub scaled_promotion: Option<f64>,
    pub quality_proxy: f64,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub players: Vec<PlayerMetrics>,
}

impl RoundMetrics {
    pub fn player(&self, id: &str) -> Option<&PlayerMetrics> {
        self.players.iter().find(|p| p.player == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub round: usize,
    pub player: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CompetitionState {
    config: CompetitionConfig,
    current: Vec<Document>,
    history: RankingHistory,
    metrics: Vec<RoundMetrics>,
    audits: Vec<DecisionAudit>,
    rejections: Vec<Rejection>,
}

impl CompetitionState {
    /// Ranks the players' initial documents as round 1.
    pub fn start(config: CompetitionConfig, env: &Environment) -> Result<Self> {
        config.validate()?;
        let current = config
            .players
            .iter()
            .map(|p| {
                Document::new(
                    document_id(&p.id, 1),
                    p.id.clone(),
                    p.initial_text.clone(),
                    config.term_cap,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = CompetitionState {
            history: RankingHistory::new(config.query.id.clone()),
            config,
            current: Vec::new(),
            metrics: Vec::new(),
            audits: Vec::new(),
            rejections: Vec::new(),
        };
        let changed = vec![true; current.len()];
        state.rank_and_record(current, changed, env)?;
        Ok(state)
    }

    pub fn config(&self) -> &CompetitionConfig {
        &self.config
    }

    /// Number of completed rounds.
    pub fn round_index(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &RankingHistory {
        &self.history
    }

    pub fn current_documents(&self) -> &[Document] {
        &self.current
    }

    pub fn current_document(&self, player: &str) -> Option<&Document> {
        self.current.iter().find(|d| d.author_id() == player)
    }

    pub fn metrics(&self) -> &[RoundMetrics] {
        &self.metrics
    }

    pub fn audits(&self) -> &[DecisionAudit] {
        &self.audits
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn latest_ranking(&self) -> Result<&Ranking> {
        self.history.current()
    }

    /// Collects every player's next document and ranks them.
    ///
    /// Human players take their entry in `submissions`; a missing or invalid
    /// submission carries the previous version over (invalid ones are
    /// recorded as rejections).
    pub fn run_round(
        &mut self,
        env: &Environment,
        submissions: &BTreeMap<String, String>,
    ) -> Result<&RoundMetrics> {
        let round = self.round_index() + 1;
        let mut next = Vec::with_capacity(self.current.len());
        let mut changed = Vec::with_capacity(self.current.len());
        for (player, prev) in self.config.players.iter().zip(&self.current) {
            let id = document_id(&player.id, round);
            let doc = match &player.strategy {
                Strategy::Static => prev.with_id(id),
                Strategy::Planted(versions) => {
                    let text = &versions[(round - 1).min(versions.len() - 1)];
                    Document::new(id, player.id.clone(), text.clone(), self.config.term_cap)?
                }
                Strategy::MimicTop => mimic_top(
                    prev,
                    &self.history,
                    &self.config.query,
                    self.config.term_cap,
                )?
                .with_id(id),
                Strategy::Bot(model) => {
                    let m = modify_document(
                        prev.id(),
                        &self.config.query,
                        &self.history,
                        model,
                        &env.stats,
                        &env.store,
                        &self.config.bot,
                    )?;
                    self.audits.push(m.audit);
                    m.document.with_id(id)
                }
                Strategy::Human => match submissions.get(&player.id) {
                    None => prev.with_id(id),
                    Some(text) => match Document::new(
                        id.clone(),
                        player.id.clone(),
                        text.clone(),
                        self.config.term_cap,
                    ) {
                        Ok(d) => d,
                        Err(e) if e.is_validation() => {
                            self.rejections.push(Rejection {
                                round,
                                player: player.id.clone(),
                                reason: e.to_string(),
                            });
                            prev.with_id(id)
                        }
                        Err(e) => return Err(e),
                    },
                },
            };
            changed.push(doc.passages() != prev.passages());
            next.push(doc);
        }
        for id in submissions.keys() {
            if !self
                .config
                .players
                .iter()
                .any(|p| &p.id == id && matches!(p.strategy, Strategy::Human))
            {
                self.rejections.push(Rejection {
                    round,
                    player: id.clone(),
                    reason: "not a human player".into(),
                });
            }
        }
        self.rank_and_record(next, changed, env)?;
        Ok(self.metrics.last().expect("round recorded"))
    }

    fn rank_and_record(
        &mut self,
        docs: Vec<Document>,
        changed: Vec<bool>,
        env: &Environment,
    ) -> Result<()> {
        let round = self.round_index() + 1;
        let ranking = rank_documents(
            &docs,
            &self.config.query,
            &self.config.engine,
            &env.stats,
            round,
        )?;
        let prev = self.history.current().ok().cloned();
        let n = ranking.len();
        let mut players = Vec::with_capacity(docs.len());
        for ((spec, doc), changed) in self.config.players.iter().zip(&docs).zip(changed) {
            let rank = ranking.rank_of(doc.id()).expect("every document is ranked");
            let promo = match &prev {
                Some(p) => {
                    let before = p
                        .rank_of(&document_id(&spec.id, round - 1))
                        .expect("every player was ranked last round");
                    raw_and_scaled_promotion(before, rank, n)?
                }
                None => None,
            };
            players.push(PlayerMetrics {
                player: spec.id.clone(),
                kind: spec.strategy.kind(),
                doc_id: doc.id().to_string(),
                rank,
                raw_promotion: promo.map(|p| p.0),
                scaled_promotion: promo.map(|p| p.1),
                quality_proxy: quality_proxy(doc, &env.stats),
                changed,
            });
        }
        self.history.push(ranking, docs.iter().cloned())?;
        self.current = docs;
        self.metrics.push(RoundMetrics { round, players });
        Ok(())
    }
}

/// Fraction of a passage's tokens that are query terms.
fn query_density(passage: &str, query_terms: &HashSet<String>) -> f64 {
    let tokens = tokenize(passage);
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().filter(|t| query_terms.contains(*t)).count() as f64 / tokens.len() as f64
}

fn first_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

/// Scripted author: copies the most query-dense sentence of the current top
/// document over its own least query-dense sentence. The top document's
/// author, or a copy that would break the term cap, submits unchanged.
pub fn mimic_top(
    doc: &Document,
    history: &RankingHistory,
    query: &Query,
    term_cap: usize,
) -> Result<Document> {
    let current = history.current()?;
    let top = history.document(current.top().ok_or(Error::EmptyHistory)?)?;
    if top.author_id() == doc.author_id() {
        return Ok(doc.clone());
    }
    let qt: HashSet<String> = query.terms().into_iter().collect();
    let top_density: Vec<f64> = top
        .passages()
        .iter()
        .map(|p| query_density(p, &qt))
        .collect();
    let own_density: Vec<f64> = doc
        .passages()
        .iter()
        .map(|p| query_density(p, &qt))
        .collect();
    let src = first_extreme(&top_density, |a, b| a > b);
    let dst = first_extreme(&own_density, |a, b| a < b);
    let mut passages = doc.passages().to_vec();
    passages[dst] = top.passages()[src].clone();
    match Document::from_passages(doc.id(), doc.author_id(), passages, term_cap) {
        Ok(d) => Ok(d),
        Err(Error::LengthCapExceeded { .. }) => Ok(doc.clone()),
        Err(e) => Err(e),
    }
}

/// A finished competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionResult {
    pub query_id: String,
    pub rankings: Vec<Ranking>,
    pub rounds: Vec<RoundMetrics>,
    pub audits: Vec<DecisionAudit>,
}

impl From<&CompetitionState> for CompetitionResult {
    fn from(s: &CompetitionState) -> Self {
        CompetitionResult {
            query_id: s.config.query.id.clone(),
            rankings: s.history.rankings().to_vec(),
            rounds: s.metrics.clone(),
            audits: s.audits.clone(),
        }
    }
}

/// Runs all rounds with no human input.
pub fn run_competition(config: CompetitionConfig, env: &Environment) -> Result<CompetitionResult> {
    let rounds = config.rounds;
    let mut state = CompetitionState::start(config, env)?;
    let none = BTreeMap::new();
    while state.round_index() < rounds {
        state.run_round(env, &none)?;
    }
    Ok(CompetitionResult::from(&state))
}

/// Runs independent competitions in parallel; output order follows input.
pub fn run_batch(
    configs: Vec<CompetitionConfig>,
    env: &Environment,
) -> Result<Vec<CompetitionResult>> {
    configs
        .into_par_iter()
        .map(|c| run_competition(c, env))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{english_stopwords, OovFallback};

    fn env(texts: &[&str], query: &str) -> Environment {
        let mut b = CorpusStats::builder();
        for t in texts {
            b.add_document(t);
        }
        b.add_query(query);
        b.stopwords(english_stopwords());
        Environment {
            stats: b.build(),
            store: EmbeddingStore::new(16, OovFallback::Hashed).unwrap(),
        }
    }

    const TEXTS: [&str; 4] = [
        "The apple is red. The tree is tall. We like the apple pie.",
        "A pear is green. Apple trees grow in the north. The sky is blue.",
        "Bananas are yellow. They grow in warm places. Monkeys eat them.",
        "The river runs fast. Fish swim in it. Birds fly over the water.",
    ];

    fn players(model: PairModel) -> Vec<PlayerSpec> {
        vec![
            PlayerSpec::new("bot", TEXTS[3], Strategy::Bot(Arc::new(model))),
            PlayerSpec::new("static", TEXTS[2], Strategy::Static),
            PlayerSpec::new("mimic", TEXTS[1], Strategy::MimicTop),
            PlayerSpec::planted("planted", vec![TEXTS[0].into()]).unwrap(),
        ]
    }

    fn config() -> CompetitionConfig {
        CompetitionConfig::new(
            Query::new("q", "apple").unwrap(),
            players(PairModel::zero()),
            3,
            EngineModel::LmDirichlet { mu: 1000.0 },
        )
    }

    #[test]
    fn static_document_never_changes() {
        let e = env(&TEXTS, "apple");
        let r = run_competition(config(), &e).unwrap();
        assert_eq!(r.rounds.len(), 3);
        for m in &r.rounds[1..] {
            assert!(!m.player("static").unwrap().changed);
        }
    }

    #[test]
    fn first_round_has_no_promotions() {
        let e = env(&TEXTS, "apple");
        let r = run_competition(config(), &e).unwrap();
        assert!(r.rounds[0]
            .players
            .iter()
            .all(|p| p.raw_promotion.is_none()));
    }

    #[test]
    fn ranks_are_a_permutation_every_round() {
        let e = env(&TEXTS, "apple");
        let r = run_competition(config(), &e).unwrap();
        for m in &r.rounds {
            let mut ranks: Vec<usize> = m.players.iter().map(|p| p.rank).collect();
            ranks.sort();
            assert_eq!(ranks, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn bot_modifies_only_when_not_first() {
        let e = env(&TEXTS, "apple");
        let r = run_competition(config(), &e).unwrap();
        for (prev, m) in r.rounds.iter().zip(&r.rounds[1..]) {
            let was_first = prev.player("bot").unwrap().rank == 1;
            assert_eq!(m.player("bot").unwrap().changed, !was_first);
        }
    }

    #[test]
    fn stuffed_document_ranks_first() {
        let texts = [
            "The cat sat. The dog ran.",
            "The cat sat. The dog ran apple apple apple.",
        ];
        let e = env(&texts, "apple");
        let players = vec![
            PlayerSpec::new("a", texts[0], Strategy::Static),
            PlayerSpec::new("b", texts[1], Strategy::Static),
            PlayerSpec::new("c", texts[0], Strategy::Static),
        ];
        let cfg = CompetitionConfig::new(
            Query::new("q", "apple").unwrap(),
            players,
            1,
            EngineModel::LmDirichlet { mu: 1000.0 },
        );
        let s = CompetitionState::start(cfg, &e).unwrap();
        assert_eq!(s.latest_ranking().unwrap().top(), Some("b@r1"));
    }

    #[test]
    fn human_over_cap_is_rejected_and_carried_over() {
        let e = env(&TEXTS, "apple");
        let mut cfg = config();
        cfg.players[1] = PlayerSpec::new("human", TEXTS[2], Strategy::Human);
        cfg.term_cap = 20;
        let mut s = CompetitionState::start(cfg, &e).unwrap();
        let long = "apple ".repeat(30) + ".";
        let subs = BTreeMap::from([("human".to_string(), long)]);
        s.run_round(&e, &subs).unwrap();
        assert_eq!(s.rejections().len(), 1);
        assert_eq!(s.current_document("human").unwrap().text(), TEXTS[2]);
    }

    #[test]
    fn human_submission_is_used_verbatim() {
        let e = env(&TEXTS, "apple");
        let mut cfg = config();
        cfg.players[1] = PlayerSpec::new("human", TEXTS[2], Strategy::Human);
        let mut s = CompetitionState::start(cfg, &e).unwrap();
        let text = "Apple apple. Apple everywhere.";
        s.run_round(
            &e,
            &BTreeMap::from([("human".to_string(), text.to_string())]),
        )
        .unwrap();
        assert_eq!(s.current_document("human").unwrap().text(), text);
    }

    #[test]
    fn duplicate_players_rejected() {
        let mut cfg = config();
        cfg.players[1].id = "bot".into();
        assert!(matches!(cfg.validate(), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn mimic_copies_densest_top_sentence() {
        let e = env(&TEXTS, "apple");
        let s = CompetitionState::start(config(), &e).unwrap();
        let top_id = s.latest_ranking().unwrap().top().unwrap().to_string();
        let top = s.history().document(&top_id).unwrap();
        let own = s.current_document("static").unwrap();
        let out = mimic_top(own, s.history(), &s.config().query, 150).unwrap();
        let diff: Vec<_> = out
            .passages()
            .iter()
            .zip(own.passages())
            .filter(|(a, b)| a != b)
            .collect();
        assert_eq!(diff.len(), 1);
        assert!(top.passages().contains(diff[0].0));
    }

    #[test]
    fn batch_is_deterministic() {
        let e = env(&TEXTS, "apple");
        let a = run_batch(vec![config(), config()], &e).unwrap();
        let b = run_batch(vec![config(), config()], &e).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
