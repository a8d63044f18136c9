//! Seeded synthetic competitions: pseudo-word topics, documents, embeddings
//! and scripted authors that revise their documents round after round.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arena::{
    CompetitionConfig, CompetitionSpec, Environment, OfflineQuery, PlayerEntry, StrategySpec,
};
use crate::bot::{BotConfig, PairModel, RankingHistory};
use crate::engine::{rank_documents, Document, EngineModel, Query, DEFAULT_MU, DEFAULT_TERM_CAP};
use crate::error::Result;
use crate::snapshot::QuerySnapshot;
use crate::text::{
    english_stopwords, tokenize, CorpusStats, DenseVector, EmbeddingStore, OovFallback,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub queries: usize,
    pub docs_per_query: usize,
    pub dimension: usize,
    pub topic_vocab: usize,
    pub filler_vocab: usize,
    pub background_docs_per_query: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    pub stopword_rate: f64,
    pub topic_rate: f64,
    /// Upper bound of an author's query-term rate.
    pub max_query_rate: f64,
    /// Chance that a scripted author revises its document in a round.
    pub edit_rate: f64,
    /// Chance that a revision copies a sentence from a higher-ranked document
    /// rather than writing a new one.
    pub copy_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            queries: 40,
            docs_per_query: 5,
            dimension: 32,
            topic_vocab: 40,
            filler_vocab: 600,
            background_docs_per_query: 10,
            min_sentences: 5,
            max_sentences: 8,
            min_sentence_len: 8,
            max_sentence_len: 14,
            stopword_rate: 0.4,
            topic_rate: 0.25,
            max_query_rate: 0.2,
            edit_rate: 0.8,
            copy_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthTopic {
    pub query: Query,
    pub words: Vec<String>,
    /// Initial document texts, one per author.
    pub initial: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub config: SynthConfig,
    pub env: Environment,
    pub topics: Vec<SynthTopic>,
    stopwords: Vec<String>,
    filler: Vec<String>,
}

fn sub_seed(seed: u64, label: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn pseudo_words(rng: &mut ChaCha8Rng, count: usize, taken: &mut HashSet<String>) -> Vec<String> {
    const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// A sentence's word mix; rates are per-token probabilities.
#[derive(Debug, Clone, Copy)]
struct Style {
    query_rate: f64,
}

impl SynthWorld {
    pub fn generate(config: SynthConfig) -> Result<SynthWorld> {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, "world", 0));
        let stop_set = english_stopwords();
        let mut stopwords: Vec<String> = stop_set.iter().cloned().collect();
        stopwords.sort();
        let mut taken: HashSet<String> = stop_set.clone();
        let filler = pseudo_words(&mut rng, config.filler_vocab, &mut taken);

        let dim = config.dimension;
        let mut store = EmbeddingStore::new(dim, OovFallback::Hashed)?;
        for w in &stopwords {
            store.insert(w.clone(), DenseVector::new(gaussian(&mut rng, dim, 0.3)))?;
        }
        for w in &filler {
            store.insert(w.clone(), DenseVector::new(gaussian(&mut rng, dim, 1.0)))?;
        }

        let mut world = SynthWorld {
            env: Environment {
                stats: CorpusStats::builder().build(),
                store,
            },
            topics: Vec::new(),
            stopwords,
            filler,
            config,
        };
        let mut stats = CorpusStats::builder();
        for q in 0..world.config.queries {
            let words = pseudo_words(&mut rng, world.config.topic_vocab, &mut taken);
            let center = gaussian(&mut rng, dim, 1.0);
            for w in &words {
                let v: Vec<f64> = center
                    .iter()
                    .zip(gaussian(&mut rng, dim, 0.6))
                    .map(|(c, n)| c + n)
                    .collect();
                world.env.store.insert(w.clone(), DenseVector::new(v))?;
            }
            let n_terms = rng.gen_range(2..=3);
            let query = Query::new(format!("q{q:03}"), words[..n_terms].join(" "))?;
            let mut topic = SynthTopic {
                query,
                words,
                initial: Vec::new(),
            };
            for _ in 0..world.config.docs_per_query {
                let style = world.random_style(&mut rng);
                topic.initial.push(world.document(&mut rng, &topic, style));
            }
            for _ in 0..world.config.background_docs_per_query {
                let style = world.random_style(&mut rng);
                stats.add_document(&world.document(&mut rng, &topic, style));
            }
            for t in &topic.initial {
                stats.add_document(t);
            }
            stats.add_query(&topic.query.text);
            world.topics.push(topic);
        }
        stats.stopwords(stop_set);
        world.env.stats = stats.build();
        Ok(world)
    }

    pub fn engine(&self) -> EngineModel {
        EngineModel::LmDirichlet { mu: DEFAULT_MU }
    }

    fn random_style(&self, rng: &mut ChaCha8Rng) -> Style {
        Style {
            query_rate: rng.gen_range(0.0..self.config.max_query_rate),
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, topic: &SynthTopic, style: Style) -> String {
        let len = rng.gen_range(self.config.min_sentence_len..=self.config.max_sentence_len);
        let qterms = topic.query.terms();
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let x: f64 = rng.gen();
            let w = if x < self.config.stopword_rate {
                self.stopwords.choose(rng)
            } else if x < self.config.stopword_rate + style.query_rate {
                qterms.choose(rng)
            } else if x < self.config.stopword_rate + style.query_rate + self.config.topic_rate {
                topic.words.choose(rng)
            } else {
                self.filler.choose(rng)
            };
            words.push(w.expect("non-empty vocabulary").clone());
        }
        let mut s = words.join(" ");
        if let Some(first) = s.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        s.push('.');
        s
    }

    fn document(&self, rng: &mut ChaCha8Rng, topic: &SynthTopic, style: Style) -> String {
        let n = rng.gen_range(self.config.min_sentences..=self.config.max_sentences);
        (0..n)
            .map(|_| self.sentence(rng, topic, style))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn author_id(k: usize) -> String {
        format!("s{k}")
    }

    /// Scripted authors compete on query `q` for `rounds` rankings. Each
    /// round an author may revise one sentence, either copying one from a
    /// document ranked above it or writing a new one in its own style.
    pub fn evolve(&self, q: usize, rounds: usize) -> Result<QuerySnapshot> {
        let topic = &self.topics[q];
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.config.seed, "evolve", q));
        let styles: Vec<Style> = topic
            .initial
            .iter()
            .map(|_| self.random_style(&mut rng))
            .collect();
        let engine = self.engine();
        let mut history = RankingHistory::new(topic.query.id.clone());
        let mut docs: Vec<Document> = topic
            .initial
            .iter()
            .enumerate()
            .map(|(k, t)| {
                Document::new(
                    format!("s{k}@r1"),
                    Self::author_id(k),
                    t.clone(),
                    DEFAULT_TERM_CAP,
                )
            })
            .collect::<Result<_>>()?;
        for round in 1..=rounds {
            if round > 1 {
                let current = history.current()?.clone();
                let mut next = Vec::with_capacity(docs.len());
                for (k, doc) in docs.iter().enumerate() {
                    let id = format!("s{k}@r{round}");
                    if !rng.gen_bool(self.config.edit_rate) {
                        next.push(doc.with_id(id));
                        continue;
                    }
                    let rank = current.rank_of(doc.id()).expect("ranked");
                    let mut passages = doc.passages().to_vec();
                    let slot = rng.gen_range(0..passages.len());
                    passages[slot] = if rank > 1 && rng.gen_bool(self.config.copy_rate) {
                        let above =
                            history.document(&current.doc_ids[rng.gen_range(0..rank - 1)])?;
                        above
                            .passages()
                            .choose(&mut rng)
                            .expect("non-empty")
                            .clone()
                    } else {
                        let mut style = styles[k];
                        style.query_rate = (style.query_rate + rng.gen_range(0.0..0.1)).min(0.35);
                        self.sentence(&mut rng, topic, style)
                    };
                    let revised = Document::from_passages(
                        id.clone(),
                        Self::author_id(k),
                        passages,
                        DEFAULT_TERM_CAP,
                    )
                    .unwrap_or_else(|_| doc.with_id(id));
                    next.push(revised);
                }
                docs = next;
            }
            let ranking = rank_documents(&docs, &topic.query, &engine, &self.env.stats, round)?;
            history.push(ranking, docs.iter().cloned())?;
        }
        Ok(QuerySnapshot {
            query: topic.query.clone(),
            history,
        })
    }

    /// Round-`t` history and round-`t+1` versions for offline evaluation.
    pub fn offline_query(&self, q: usize, t: usize) -> Result<OfflineQuery> {
        OfflineQuery::from_snapshot(&self.evolve(q, t + 1)?, t)
    }

    /// A bot, a static baseline, a copying author and two planted replays
    /// (taken from this query's scripted evolution) on query `q`.
    pub fn online_spec(&self, q: usize, rounds: usize) -> Result<CompetitionSpec> {
        let topic = &self.topics[q];
        let replay = self.evolve(q, rounds)?;
        let versions = |k: usize| -> Vec<String> {
            replay
                .history
                .rankings()
                .iter()
                .map(|r| {
                    let id = format!("s{k}@r{}", r.round_index);
                    replay
                        .history
                        .document(&id)
                        .expect("replayed")
                        .text()
                        .to_string()
                })
                .collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.config.seed, "seats", q));
        let mut seats: Vec<usize> = (0..topic.initial.len()).collect();
        seats.shuffle(&mut rng);
        let entry = |id: &str, text: Option<String>, strategy| PlayerEntry {
            id: id.into(),
            initial_text: text,
            strategy,
        };
        Ok(CompetitionSpec {
            query: topic.query.clone(),
            players: vec![
                entry(
                    "bot",
                    Some(topic.initial[seats[0]].clone()),
                    StrategySpec::Bot,
                ),
                entry(
                    "static",
                    Some(topic.initial[seats[1]].clone()),
                    StrategySpec::Static,
                ),
                entry(
                    "mimic",
                    Some(topic.initial[seats[2]].clone()),
                    StrategySpec::MimicTop,
                ),
                entry("planted1", None, StrategySpec::Planted(versions(seats[3]))),
                entry("planted2", None, StrategySpec::Planted(versions(seats[4]))),
            ],
            rounds,
            engine: self.engine(),
            seed: self.config.seed,
            term_cap: DEFAULT_TERM_CAP,
            bot: BotConfig::default(),
        })
    }

    pub fn online_config(
        &self,
        q: usize,
        model: Arc<PairModel>,
        rounds: usize,
    ) -> Result<CompetitionConfig> {
        self.online_spec(q, rounds)?.build(Some(&model), &|_| None)
    }
}

/// Fraction of tokens of `text` that are query terms; handy for checks.
pub fn query_term_rate(text: &str, query: &Query) -> f64 {
    let qt: HashSet<String> = query.terms().into_iter().collect();
    let toks = tokenize(text);
    if toks.is_empty() {
        return 0.0;
    }
    toks.iter().filter(|t| qt.contains(*t)).count() as f64 / toks.len() as f64
}
