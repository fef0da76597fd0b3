//! Shared ASC store: the developer spec plus templates learned from users.
//!
//! Readers take a cheap [`Arc<Engine>`] snapshot; learning a template builds
//! a new engine and swaps it in, so in-flight grounding keeps a consistent
//! view. Learned templates go to a sidecar file next to the spec and are
//! replayed on open; the spec file itself is never rewritten.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::engine::Engine;
use crate::matcher::{EmbeddingError, EmbeddingTable};
use crate::spec::{parse_learned_templates, parse_spec, render_learned_entries, AppSpec, Aid, AscKind, AscTemplate, SpecError};
use crate::tagger::{LexiconError, SynonymLexicon};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("AID {0} is not an action")]
    NotAnAction(Aid),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Sidecar path for a spec file: `blocksworld.toml` → `blocksworld.learned.toml`.
pub fn sidecar_path(spec_path: &Path) -> PathBuf {
    let stem = spec_path.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    spec_path.with_file_name(format!("{stem}.learned.toml"))
}

struct Inner {
    learned: BTreeMap<Aid, Vec<AscTemplate>>,
    engine: Arc<Engine>,
}

pub struct AscStore {
    base: AppSpec,
    lexicon: SynonymLexicon,
    embeddings: Option<Arc<EmbeddingTable>>,
    sidecar: Option<PathBuf>,
    inner: RwLock<Inner>,
    /// Serializes writers, including the sidecar write.
    writer: Mutex<()>,
}

impl AscStore {
    /// In-memory store; nothing is persisted.
    pub fn new(spec: AppSpec, lexicon: SynonymLexicon, embeddings: Option<Arc<EmbeddingTable>>) -> Self {
        let engine = Arc::new(Engine::new(spec.clone(), lexicon.clone(), embeddings.clone()));
        AscStore {
            base: spec,
            lexicon,
            embeddings,
            sidecar: None,
            inner: RwLock::new(Inner { learned: BTreeMap::new(), engine }),
            writer: Mutex::new(()),
        }
    }

    /// Loads a spec file, its lexicon and embeddings (paths relative to the
    /// spec file), and replays the learned-template sidecar if present.
    pub fn open(spec_path: &Path) -> Result<Self, StoreError> {
        let source = std::fs::read_to_string(spec_path).map_err(io_error(spec_path))?;
        let spec = parse_spec(&source)?;
        let dir = spec_path.parent().unwrap_or(Path::new("."));
        let lexicon = match &spec.synonym_lexicon_path {
            Some(p) => SynonymLexicon::load(&dir.join(p))?,
            None => SynonymLexicon::default(),
        };
        let embeddings = match &spec.embedding_path {
            Some(p) => Some(Arc::new(EmbeddingTable::load(&dir.join(p))?)),
            None => None,
        };
        AscStore::new(spec, lexicon, embeddings).with_sidecar(&sidecar_path(spec_path))
    }

    /// Attaches a sidecar file, replaying any templates it already holds.
    pub fn with_sidecar(mut self, path: &Path) -> Result<Self, StoreError> {
        if path.exists() {
            let source = std::fs::read_to_string(path).map_err(io_error(path))?;
            let learned = parse_learned_templates(&source, &self.base)?;
            let engine = Arc::new(self.build(&learned));
            self.inner = RwLock::new(Inner { learned, engine });
        }
        self.sidecar = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn with_embeddings(self, table: Arc<EmbeddingTable>) -> Self {
        let store = AscStore { embeddings: Some(table), ..self };
        let engine = Arc::new(store.build(&store.inner.read().learned));
        store.inner.write().engine = engine;
        store
    }

    /// In-memory copy with the same learned templates; writes to it are not
    /// persisted and do not affect `self`.
    pub fn snapshot(&self) -> AscStore {
        let inner = self.inner.read();
        AscStore {
            base: self.base.clone(),
            lexicon: self.lexicon.clone(),
            embeddings: self.embeddings.clone(),
            sidecar: None,
            inner: RwLock::new(Inner { learned: inner.learned.clone(), engine: inner.engine.clone() }),
            writer: Mutex::new(()),
        }
    }

    pub fn app_name(&self) -> &str {
        &self.base.app_name
    }

    pub fn sidecar(&self) -> Option<&Path> {
        self.sidecar.as_deref()
    }

    /// Current engine snapshot.
    pub fn engine(&self) -> Arc<Engine> {
        self.inner.read().engine.clone()
    }

    pub fn learned(&self) -> BTreeMap<Aid, Vec<AscTemplate>> {
        self.inner.read().learned.clone()
    }

    pub fn learned_count(&self) -> usize {
        self.inner.read().learned.values().map(Vec::len).sum()
    }

    fn build(&self, learned: &BTreeMap<Aid, Vec<AscTemplate>>) -> Engine {
        let mut spec = self.base.clone();
        for asc in spec.ascs.iter_mut() {
            if let Some(extra) = learned.get(&asc.aid) {
                asc.templates.extend(extra.iter().cloned());
            }
        }
        Engine::new(spec, self.lexicon.clone(), self.embeddings.clone())
    }

    /// Adds a template to an action ASC. Returns `false` when the ASC already
    /// has an identical template.
    pub fn add_template(&self, aid: Aid, template: AscTemplate) -> Result<bool, StoreError> {
        let _guard = self.writer.lock();
        let engine = self.engine();
        let asc = engine
            .spec()
            .asc(aid)
            .filter(|a| a.kind == AscKind::Action)
            .ok_or(StoreError::NotAnAction(aid))?;
        asc.check_template(&template)?;
        if asc.templates.contains(&template) {
            return Ok(false);
        }
        let mut learned = self.learned();
        learned.entry(aid).or_default().push(template);
        if let Some(path) = &self.sidecar {
            write_atomically(path, &render_learned_entries(&self.base, &learned))?;
        }
        let engine = Arc::new(self.build(&learned));
        *self.inner.write() = Inner { learned, engine };
        Ok(true)
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp).map_err(io_error(&tmp))?;
    file.write_all(contents.as_bytes()).map_err(io_error(&tmp))?;
    file.sync_all().map_err(io_error(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_error(path))
}
