use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nlground::learner::LearnerSession;
use nlground::{bundled, AscStore, GroundingResult, World};
use parking_lot::Mutex;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// One client's environment plus its in-progress learner dialogue.
pub struct Session {
    pub id: String,
    pub app: String,
    pub world: World,
    /// Bumped whenever an action changes `world`.
    pub version: u64,
    pub last_ground: Option<GroundingResult>,
    pub learner: Option<LearnerSession>,
    pub last_used: Instant,
}

pub struct AppState {
    pub stores: BTreeMap<String, Arc<AscStore>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    pub idle_timeout: Duration,
}

impl AppState {
    pub fn new(stores: BTreeMap<String, Arc<AscStore>>) -> Self {
        AppState { stores, sessions: Mutex::new(HashMap::new()), idle_timeout: DEFAULT_IDLE_TIMEOUT }
    }

    /// The applications compiled into the engine, held in memory.
    pub fn bundled() -> Self {
        let stores = bundled::NAMES
            .iter()
            .map(|n| (n.to_string(), Arc::new(bundled::store(n).expect("bundled name"))))
            .collect();
        AppState::new(stores)
    }

    /// Every `*.toml` spec in `dir` (learned-template sidecars excluded),
    /// keyed by application name.
    pub fn from_dir(dir: &Path) -> anyhow::Result<Self> {
        let mut stores = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if !name.ends_with(".toml") || name.ends_with(".learned.toml") {
                continue;
            }
            let store = AscStore::open(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            stores.insert(store.app_name().to_string(), Arc::new(store));
        }
        anyhow::ensure!(!stores.is_empty(), "no spec files in {}", dir.display());
        Ok(AppState::new(stores))
    }

    pub fn with_idle_timeout(mut self, timeout: Duration) -> Self {
        self.idle_timeout = timeout;
        self
    }

    pub fn insert_session(&self, session: Session) -> Arc<Mutex<Session>> {
        let handle = Arc::new(Mutex::new(session));
        let id = handle.lock().id.clone();
        self.sessions.lock().insert(id, handle.clone());
        handle
    }

    /// Looks up a live session, dropping any that have been idle too long.
    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        let mut sessions = self.sessions.lock();
        let now = Instant::now();
        // try_lock: a session busy with a request is by definition not idle
        sessions.retain(|_, s| s.try_lock().is_none_or(|s| now.duration_since(s.last_used) < self.idle_timeout));
        let handle = sessions.get(id)?.clone();
        handle.lock().last_used = now;
        Some(handle)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().len()
    }
}
