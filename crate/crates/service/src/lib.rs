//! HTTP facade over the arena for live competitions with human players.
//!
//! Every competition keeps an append-only JSONL log in the data directory;
//! the in-memory state is a fold over it, so a restarted server picks up
//! where it stopped. Mutations of one competition are serialized by a
//! per-competition lock; reads serve a snapshot of the completed rounds.
//! Neither the engine model nor the bot's pair model is ever serialized into
//! a response.

mod api;
mod competition;
mod error;
pub mod log;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rankpromo::bot::PairModel;
use rankpromo::text::EmbeddingStore;

pub use api::router;
pub use competition::{hash_token, Accepted, Entry, RankingView, Report, Summary};
pub use error::ApiError;

use competition::{Competition, Resources, Views};
use log::EventLog;

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Credential for creating competitions and advancing rounds.
    pub admin_token: String,
    pub model: Option<Arc<PairModel>>,
    pub store: EmbeddingStore,
    /// Directory served at `/` for the browser client.
    pub static_dir: Option<PathBuf>,
}

struct Writer {
    competition: Competition,
    log: EventLog,
}

struct Slot {
    writer: tokio::sync::Mutex<Writer>,
    views: RwLock<Arc<Views>>,
}

impl Slot {
    fn publish(&self, c: &Competition) {
        *self.views.write().expect("views lock") = Arc::new(c.views());
    }

    fn views(&self) -> Arc<Views> {
        self.views.read().expect("views lock").clone()
    }
}

struct Inner {
    admin_hash: String,
    resources: Resources,
    data_dir: PathBuf,
    static_dir: Option<PathBuf>,
    competitions: RwLock<HashMap<String, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens the data directory, replaying every competition log in it.
    pub fn open(config: ServiceConfig) -> Result<AppState, String> {
        if config.admin_token.is_empty() {
            return Err("admin token must not be empty".into());
        }
        std::fs::create_dir_all(&config.data_dir)
            .map_err(|e| format!("{}: {e}", config.data_dir.display()))?;
        let resources = Resources {
            model: config.model,
            store: config.store,
        };
        let mut competitions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&config.data_dir)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let (log, events) =
                EventLog::open_existing(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let competition = Competition::replay(events, &resources)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let views = RwLock::new(Arc::new(competition.views()));
            competitions.insert(
                competition.id.clone(),
                Arc::new(Slot {
                    writer: tokio::sync::Mutex::new(Writer { competition, log }),
                    views,
                }),
            );
        }
        tracing::info!(
            "loaded {} competitions from {}",
            competitions.len(),
            config.data_dir.display()
        );
        Ok(AppState(Arc::new(Inner {
            admin_hash: hash_token(&config.admin_token),
            resources,
            data_dir: config.data_dir,
            static_dir: config.static_dir,
            competitions: RwLock::new(competitions),
        })))
    }

    pub fn data_dir(&self) -> &Path {
        &self.0.data_dir
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.0
            .competitions
            .read()
            .expect("competitions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no competition `{id}`")))
    }
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), String> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| format!("bind {addr}: {e}"))?;
    tracing::info!(
        "listening on {}",
        listener.local_addr().map_err(|e| e.to_string())?
    );
    axum::serve(listener, router(state))
        .await
        .map_err(|e| e.to_string())
}
