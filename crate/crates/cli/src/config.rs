use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rankpromo::arena::CompetitionSpec;
use rankpromo::bot::{BotConfig, PairModel};
use rankpromo::engine::{EngineModel, DEFAULT_TERM_CAP};
use rankpromo::snapshot::{read_snapshots, QuerySnapshot};
use rankpromo::text::{english_stopwords, CorpusStats, EmbeddingStore, OovFallback};
use rankpromo::training::{TrainedModel, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub snapshots: Option<PathBuf>,
    /// Snapshots for offline evaluation; their last round supplies the
    /// authors' next versions.
    pub offline_snapshots: Option<PathBuf>,
    /// Collection statistics; computed from the snapshots when absent.
    pub stats: Option<PathBuf>,
    /// Word vectors; hashed vectors of `embedding_dimension` when absent.
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineSettings {
    /// Variant name to model file.
    pub models: BTreeMap<String, PathBuf>,
    /// Ranking round the modifications start from; the last but one of
    /// each snapshot when absent.
    pub round: Option<usize>,
    pub ranks: Vec<usize>,
    pub n_perm: usize,
    pub seed: u64,
    /// Extra `[a, b]` arm pairs to test; empty means the default set.
    pub comparisons: Vec<[String; 2]>,
}

impl Default for OfflineSettings {
    fn default() -> Self {
        OfflineSettings {
            models: BTreeMap::new(),
            round: None,
            ranks: vec![2, 3, 4, 5],
            n_perm: 100_000,
            seed: 0,
            comparisons: Vec::new(),
        }
    }
}

fn default_dimension() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub paths: Paths,
    #[serde(default = "default_dimension")]
    pub embedding_dimension: usize,
    pub engine: EngineModel,
    pub bot: BotConfig,
    pub training: TrainingConfig,
    pub offline: OfflineSettings,
    pub competitions: Vec<CompetitionSpec>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            paths: Paths::default(),
            embedding_dimension: default_dimension(),
            engine: EngineModel::default(),
            bot: BotConfig::default(),
            training: TrainingConfig::default(),
            offline: OfflineSettings::default(),
            competitions: Vec::new(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl Settings {
    /// Reads a TOML config; relative paths are taken from the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Settings, CliError> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut s: Settings = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut s.paths;
        for field in [
            &mut p.snapshots,
            &mut p.offline_snapshots,
            &mut p.stats,
            &mut p.embeddings,
            &mut p.model,
            &mut p.out_dir,
        ] {
            resolve(base, field);
        }
        for m in s.offline.models.values_mut() {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        s.engine.validate()?;
        s.training.validate()?;
        Ok(s)
    }

    pub fn term_cap(&self) -> usize {
        if self.bot.term_cap == 0 {
            DEFAULT_TERM_CAP
        } else {
            self.bot.term_cap
        }
    }

    pub fn store(&self) -> Result<EmbeddingStore, CliError> {
        match &self.paths.embeddings {
            Some(p) => {
                let f = File::open(p).map_err(|e| CliError::io(p, e))?;
                Ok(EmbeddingStore::load(
                    BufReader::new(f),
                    OovFallback::Hashed,
                )?)
            }
            None => Ok(EmbeddingStore::new(
                self.embedding_dimension,
                OovFallback::Hashed,
            )?),
        }
    }

    /// The configured statistics file, or statistics over `snapshots`.
    pub fn stats(&self, snapshots: &[QuerySnapshot]) -> Result<CorpusStats, CliError> {
        match &self.paths.stats {
            Some(p) => read_json(p),
            None => Ok(rankpromo::snapshot::stats_for(
                snapshots,
                english_stopwords(),
            )),
        }
    }

    pub fn snapshots(&self, path: Option<&Path>) -> Result<Vec<QuerySnapshot>, CliError> {
        let p = path.ok_or_else(|| CliError::Validation("no snapshot file given".into()))?;
        let f = File::open(p).map_err(|e| CliError::io(p, e))?;
        Ok(read_snapshots(BufReader::new(f), self.term_cap())?)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// A trained model file, or a bare pair model.
pub fn read_model(path: &Path) -> Result<Arc<PairModel>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if let Ok(m) = TrainedModel::read(text.as_bytes()) {
        return Ok(Arc::new(m.model));
    }
    serde_json::from_str::<PairModel>(text.trim())
        .map(Arc::new)
        .map_err(|e| CliError::Validation(format!("{}: not a model file: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(path, e))
}
