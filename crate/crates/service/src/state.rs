use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use episodic_core::augment::FLAG_RAW;
use episodic_core::config::{AppConfig, ConfigError};
use episodic_core::embedding::Embedder;
use episodic_core::fixture;
use episodic_core::llm::ChatProvider;
use episodic_core::memory::{load_store, save_store, MemoryStore, StoreError, StoreMetadata};
use episodic_core::persona::{ChatSession, StoreKind};

use crate::error::ErrorBody;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("store file {path}: {source}")]
    StoreFile { path: PathBuf, source: StoreError },
    #[error("store directory {path}: {source}")]
    StoreDir {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Startup options beyond the shared app config.
#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub config: AppConfig,
    /// Stores are loaded from and saved to `<dir>/<id>.jsonl`.
    pub store_dir: Option<PathBuf>,
    /// Preload the bundled fixture stores as `fixture` and `fixture-raw`.
    /// Only honoured with the trigram embedder, which built them.
    pub preload_fixture: bool,
    /// Fixed creation time for new stores; the clock rule applies when unset.
    pub created_at: Option<i64>,
}

#[derive(Debug)]
pub struct StoreEntry {
    pub id: String,
    pub kind: StoreKind,
    pub store: MemoryStore,
}

/// What `GET /stores/{id}` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub store_id: String,
    pub kind: StoreKind,
    pub records: usize,
    pub dimension: usize,
    pub k: usize,
    pub metadata: StoreMetadata,
}

impl StoreSummary {
    pub fn of(id: &str, kind: StoreKind, store: &MemoryStore) -> Self {
        Self {
            store_id: id.to_string(),
            kind,
            records: store.len(),
            dimension: store.dimension(),
            k: store.k(),
            metadata: store.metadata().clone(),
        }
    }
}

pub struct SessionSlot {
    pub session: Arc<tokio::sync::Mutex<ChatSession>>,
    pub store: Option<Arc<StoreEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub status: JobState,
    pub store: Option<StoreSummary>,
    pub error: Option<ErrorBody>,
}

pub struct AppState {
    pub config: AppConfig,
    pub llm: Arc<dyn ChatProvider>,
    pub embedder: Arc<dyn Embedder>,
    pub store_dir: Option<PathBuf>,
    pub created_at: Option<i64>,
    pub stores: RwLock<BTreeMap<String, Arc<StoreEntry>>>,
    pub sessions: RwLock<BTreeMap<String, Arc<SessionSlot>>>,
    pub jobs: RwLock<BTreeMap<String, JobStatus>>,
    counter: AtomicU64,
}

/// Raw stores are recognised by every record carrying the raw flag.
fn kind_of(store: &MemoryStore) -> StoreKind {
    let raw = !store.is_empty()
        && store
            .records()
            .iter()
            .all(|r| r.flags.iter().any(|f| f == FLAG_RAW));
    if raw {
        StoreKind::Raw
    } else {
        StoreKind::Augmented
    }
}

fn load_dir(dir: &Path) -> Result<Vec<(String, MemoryStore)>, ServiceError> {
    let dir_error = |source| ServiceError::StoreDir {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(dir_error)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(dir_error)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            load_store(&path)
                .map(|s| (id, s))
                .map_err(|source| ServiceError::StoreFile { path, source })
        })
        .collect()
}

impl AppState {
    /// Builds the providers the config describes.
    pub fn new(options: ServiceOptions) -> Result<Self, ServiceError> {
        let llm: Arc<dyn ChatProvider> = Arc::from(options.config.chat_provider()?);
        let embedder: Arc<dyn Embedder> = Arc::from(options.config.embedder()?);
        Self::with_providers(options, llm, embedder)
    }

    /// Uses the given providers instead of the ones in the config.
    pub fn with_providers(
        options: ServiceOptions,
        llm: Arc<dyn ChatProvider>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, ServiceError> {
        let ServiceOptions {
            config,
            store_dir,
            preload_fixture,
            created_at,
        } = options;
        let state = Self {
            llm,
            embedder,
            store_dir: store_dir.clone(),
            created_at,
            stores: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(BTreeMap::new()),
            jobs: RwLock::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
            config,
        };
        if preload_fixture
            && matches!(
                state.config.embedder,
                episodic_core::config::EmbedderConfig::Trigram
            )
        {
            state.insert_store(
                fixture::STORE_ID,
                StoreKind::Augmented,
                fixture::augmented_store(),
            );
            state.insert_store(fixture::RAW_STORE_ID, StoreKind::Raw, fixture::raw_store());
        }
        if let Some(dir) = &store_dir {
            for (id, store) in load_dir(dir)? {
                let kind = kind_of(&store);
                state.insert_store(&id, kind, store);
            }
        }
        Ok(state)
    }

    pub fn next_id(&self, prefix: &str) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        format!("{prefix}-{n}")
    }

    /// A fresh store id that no loaded store uses.
    pub fn next_store_id(&self) -> String {
        loop {
            let id = self.next_id("store");
            if !self.stores.read().expect("stores lock").contains_key(&id) {
                return id;
            }
        }
    }

    pub fn creation_time(&self) -> i64 {
        self.created_at
            .unwrap_or_else(|| episodic_core::config::creation_time(self.config.uses_stub()))
    }

    pub fn insert_store(&self, id: &str, kind: StoreKind, store: MemoryStore) -> Arc<StoreEntry> {
        let entry = Arc::new(StoreEntry {
            id: id.to_string(),
            kind,
            store,
        });
        self.stores
            .write()
            .expect("stores lock")
            .insert(id.to_string(), entry.clone());
        entry
    }

    /// Saves a store into the store directory, if there is one.
    pub fn persist(&self, entry: &StoreEntry) -> Result<(), StoreError> {
        match &self.store_dir {
            Some(dir) => save_store(&entry.store, dir.join(format!("{}.jsonl", entry.id))),
            None => Ok(()),
        }
    }

    pub fn store(&self, id: &str) -> Option<Arc<StoreEntry>> {
        self.stores.read().expect("stores lock").get(id).cloned()
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
    }
}
