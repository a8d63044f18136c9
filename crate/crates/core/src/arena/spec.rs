use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CompetitionConfig, Environment, PlayerSpec, Strategy};
use crate::bot::{BotConfig, PairModel};
use crate::engine::{EngineModel, Query, DEFAULT_TERM_CAP};
use crate::error::{Error, Result};
use crate::text::{english_stopwords, CorpusStats, EmbeddingStore};

/// Serializable form of a player's strategy. The bot's model is supplied
/// separately when the spec is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    Bot,
    Static,
    MimicTop,
    Planted(Vec<String>),
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerEntry {
    pub id: String,
    /// Required for every strategy except `human` and `planted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_text: Option<String>,
    pub strategy: StrategySpec,
}

fn default_rounds() -> usize {
    5
}

fn default_term_cap() -> usize {
    DEFAULT_TERM_CAP
}

/// A competition as written in config files and request bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionSpec {
    pub query: Query,
    pub players: Vec<PlayerEntry>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub engine: EngineModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_term_cap")]
    pub term_cap: usize,
    #[serde(default)]
    pub bot: BotConfig,
}

impl CompetitionSpec {
    pub fn has_humans(&self) -> bool {
        self.players
            .iter()
            .any(|p| p.strategy == StrategySpec::Human)
    }

    /// Resolves the spec into a runnable config. `human_texts` supplies the
    /// first document of human players that have no `initial_text`.
    pub fn build(
        &self,
        model: Option<&Arc<PairModel>>,
        human_texts: &dyn Fn(&str) -> Option<String>,
    ) -> Result<CompetitionConfig> {
        let mut players = Vec::with_capacity(self.players.len());
        for p in &self.players {
            let spec = match &p.strategy {
                StrategySpec::Planted(versions) => {
                    PlayerSpec::planted(p.id.clone(), versions.clone())?
                }
                StrategySpec::Human => {
                    let text = human_texts(&p.id)
                        .or_else(|| p.initial_text.clone())
                        .ok_or_else(|| {
                            Error::Config(format!("human player `{}` has no document", p.id))
                        })?;
                    PlayerSpec::new(p.id.clone(), text, Strategy::Human)
                }
                other => {
                    let text = p.initial_text.clone().ok_or_else(|| {
                        Error::Config(format!("player `{}` needs an initial_text", p.id))
                    })?;
                    let strategy = match other {
                        StrategySpec::Bot => Strategy::Bot(model.cloned().ok_or_else(|| {
                            Error::Config(format!(
                                "player `{}` is a bot but no model is loaded",
                                p.id
                            ))
                        })?),
                        StrategySpec::Static => Strategy::Static,
                        StrategySpec::MimicTop => Strategy::MimicTop,
                        _ => unreachable!(),
                    };
                    PlayerSpec::new(p.id.clone(), text, strategy)
                }
            };
            players.push(spec);
        }
        let config = CompetitionConfig {
            query: self.query.clone(),
            players,
            rounds: self.rounds,
            engine: self.engine.clone(),
            seed: self.seed,
            term_cap: self.term_cap,
            bot: BotConfig {
                term_cap: self.term_cap,
                ..self.bot
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not depend on human input.
    pub fn validate(&self, model: Option<&Arc<PairModel>>) -> Result<()> {
        self.build(model, &|_| Some("placeholder".into()))
            .map(|_| ())
    }
}

impl Environment {
    /// Collection statistics over a competition's own documents and query,
    /// with the bundled English stopword list.
    pub fn for_competition(config: &CompetitionConfig, store: EmbeddingStore) -> Environment {
        let mut b = CorpusStats::builder();
        for p in &config.players {
            match &p.strategy {
                Strategy::Planted(versions) => {
                    for v in versions {
                        b.add_document(v);
                    }
                }
                _ => {
                    b.add_document(&p.initial_text);
                }
            }
        }
        b.add_query(&config.query.text);
        b.stopwords(english_stopwords());
        Environment {
            stats: b.build(),
            store,
        }
    }
}
