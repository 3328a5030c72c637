//! On-disk project state.
//!
//! ```text
//! <root>/
//!   registry.json        corpora, models, queries, word vectors, tf-idf fits
//!   corpora/<id>.json    {"format_version": 1, "corpus": {...}}
//!   tfidf/<id>.json      tf-idf statistics fitted on corpus <id>
//!   models/<name>.json   reranker weights and the search settings used to train them
//!   ratings.jsonl        append-only, one timestamped rating per line
//! ```
//!
//! Every file carries a `format_version`. Writers go through one mutex and
//! replace files by rename, so readers always see a complete snapshot.
//! Corpora are never modified after registration.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use propmatch_core::corpus::Corpus;
use propmatch_core::embedding::{fit_tfidf, load_embeddings, EmbeddingTable, TfIdfModel};
use propmatch_core::filter::PropositionQuery;
use propmatch_core::models::{ModelFile, RerankerModel};
use propmatch_core::pipeline::{RatingRecord, RerankerKind};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub documents: usize,
    pub sentences: usize,
    /// Sentences with a dependency tree.
    pub parsed: usize,
    pub created: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub kind: RerankerKind,
    pub created: DateTime<Utc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredQuery {
    #[serde(flatten)]
    pub query: PropositionQuery,
    pub created: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub name: String,
    /// The vector file itself stays where it is.
    pub path: PathBuf,
    pub dim: usize,
    pub words: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Registry {
    format_version: u32,
    corpora: Vec<CorpusEntry>,
    models: Vec<ModelEntry>,
    queries: Vec<StoredQuery>,
    embeddings: Vec<EmbeddingEntry>,
    /// Corpus ids with a persisted tf-idf fit.
    tfidf: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    format_version: u32,
    corpus: Corpus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRating {
    #[serde(flatten)]
    pub rating: RatingRecord,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct RatingLine {
    format_version: u32,
    #[serde(flatten)]
    stored: StoredRating,
}

#[derive(Default)]
struct Caches {
    corpora: HashMap<String, Arc<Corpus>>,
    models: HashMap<String, Arc<ModelFile>>,
    embeddings: HashMap<PathBuf, Arc<EmbeddingTable>>,
    // in-memory fits for corpora without a persisted one
    tfidf: HashMap<String, Arc<TfIdfModel>>,
}

pub struct ProjectStore {
    root: PathBuf,
    registry: RwLock<Registry>,
    writer: Mutex<()>,
    caches: Mutex<Caches>,
}

/// Ids end up in file names, so they are kept to a safe alphabet.
pub fn check_id(kind: &'static str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!(
            "{kind} id `{id}` must be 1 to 128 characters from [A-Za-z0-9._-]"
        )))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn next_free(prefix: &str, taken: impl Fn(&str) -> bool) -> String {
    (1..)
        .map(|i| format!("{prefix}{i}"))
        .find(|id| !taken(id))
        .expect("unbounded")
}

impl ProjectStore {
    /// Opens the store at `root`, creating an empty one if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in ["corpora", "tfidf", "models"] {
            fs::create_dir_all(root.join(dir))?;
        }
        let path = root.join("registry.json");
        let registry = if path.exists() {
            let r: Registry = serde_json::from_slice(&fs::read(&path)?)?;
            if r.format_version != STORE_FORMAT_VERSION {
                return Err(ServiceError::BadRequest(format!(
                    "store format version {} is not supported",
                    r.format_version
                )));
            }
            r
        } else {
            let r = Registry {
                format_version: STORE_FORMAT_VERSION,
                ..Registry::default()
            };
            write_atomic(&path, &serde_json::to_vec_pretty(&r)?)?;
            r
        };
        Ok(ProjectStore {
            root,
            registry: RwLock::new(registry),
            writer: Mutex::new(()),
            caches: Mutex::new(Caches::default()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Registry> {
        self.registry.read().unwrap_or_else(|e| e.into_inner())
    }

    fn caches(&self) -> std::sync::MutexGuard<'_, Caches> {
        self.caches.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` on a copy of the registry while holding the writer lock and
    /// commits the copy once it is on disk.
    fn update<T>(&self, f: impl FnOnce(&mut Registry) -> Result<T>) -> Result<T> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = self.read().clone();
        let out = f(&mut next)?;
        write_atomic(&self.root.join("registry.json"), &serde_json::to_vec_pretty(&next)?)?;
        *self.registry.write().unwrap_or_else(|e| e.into_inner()) = next;
        Ok(out)
    }

    // corpora

    pub fn corpora(&self) -> Vec<CorpusEntry> {
        self.read().corpora.clone()
    }

    /// Registers `corpus` under `id`, or under the next free `c<n>`.
    pub fn add_corpus(&self, id: Option<&str>, corpus: Corpus) -> Result<CorpusEntry> {
        if let Some(id) = id {
            check_id("corpus", id)?;
        }
        let corpus = Arc::new(corpus);
        let entry = self.update(|reg| {
            let id = match id {
                Some(id) if reg.corpora.iter().any(|c| c.id == id) => {
                    return Err(ServiceError::Conflict {
                        kind: "corpus",
                        id: id.to_string(),
                    })
                }
                Some(id) => id.to_string(),
                None => next_free("c", |c| reg.corpora.iter().any(|e| e.id == c)),
            };
            let entry = CorpusEntry {
                id: id.clone(),
                documents: corpus.documents().len(),
                sentences: corpus.len(),
                parsed: corpus.sentences().filter(|(_, s)| s.tree.is_some()).count(),
                created: Utc::now(),
            };
            let file = serde_json::to_vec(&CorpusFile {
                format_version: STORE_FORMAT_VERSION,
                corpus: (*corpus).clone(),
            })?;
            write_atomic(&self.root.join("corpora").join(format!("{id}.json")), &file)?;
            reg.corpora.push(entry.clone());
            Ok(entry)
        })?;
        self.caches().corpora.insert(entry.id.clone(), corpus);
        Ok(entry)
    }

    /// The most recently registered corpus.
    pub fn latest_corpus(&self) -> Option<String> {
        self.read().corpora.last().map(|c| c.id.clone())
    }

    pub fn corpus(&self, id: &str) -> Result<Arc<Corpus>> {
        if !self.read().corpora.iter().any(|c| c.id == id) {
            return Err(ServiceError::not_found("corpus", id));
        }
        if let Some(c) = self.caches().corpora.get(id) {
            return Ok(c.clone());
        }
        let file: CorpusFile =
            serde_json::from_slice(&fs::read(self.root.join("corpora").join(format!("{id}.json")))?)?;
        check_version("corpus", file.format_version)?;
        let c = Arc::new(file.corpus);
        self.caches().corpora.insert(id.to_string(), c.clone());
        Ok(c)
    }

    // tf-idf

    /// Fits tf-idf statistics on corpus `id` and persists them.
    pub fn fit_tfidf(&self, id: &str) -> Result<Arc<TfIdfModel>> {
        let corpus = self.corpus(id)?;
        let model = Arc::new(fit_tfidf(&corpus)?);
        self.update(|reg| {
            write_atomic(
                &self.root.join("tfidf").join(format!("{id}.json")),
                &serde_json::to_vec(&*model)?,
            )?;
            if !reg.tfidf.iter().any(|c| c == id) {
                reg.tfidf.push(id.to_string());
            }
            Ok(())
        })?;
        self.caches().tfidf.insert(id.to_string(), model.clone());
        Ok(model)
    }

    /// The persisted fit for corpus `id`, or a fresh in-memory one.
    pub fn tfidf(&self, id: &str) -> Result<Arc<TfIdfModel>> {
        let corpus = self.corpus(id)?;
        if let Some(m) = self.caches().tfidf.get(id) {
            return Ok(m.clone());
        }
        let persisted = self.read().tfidf.iter().any(|c| c == id);
        let model = if persisted {
            serde_json::from_slice(&fs::read(self.root.join("tfidf").join(format!("{id}.json")))?)?
        } else {
            fit_tfidf(&corpus)?
        };
        let model = Arc::new(model);
        self.caches().tfidf.insert(id.to_string(), model.clone());
        Ok(model)
    }

    // word vectors

    pub fn embeddings_entries(&self) -> Vec<EmbeddingEntry> {
        self.read().embeddings.clone()
    }

    /// Loads the vector file at `path` to check it, then records it as `name`.
    pub fn add_embeddings(&self, name: &str, path: &Path) -> Result<EmbeddingEntry> {
        check_id("embeddings", name)?;
        let path = fs::canonicalize(path)?;
        let table = self.load_table(&path)?;
        self.update(|reg| {
            if reg.embeddings.iter().any(|e| e.name == name) {
                return Err(ServiceError::Conflict {
                    kind: "embeddings",
                    id: name.to_string(),
                });
            }
            let entry = EmbeddingEntry {
                name: name.to_string(),
                path: path.clone(),
                dim: table.dim(),
                words: table.len(),
            };
            reg.embeddings.push(entry.clone());
            Ok(entry)
        })
    }

    /// The vectors registered as `name`.
    pub fn embeddings(&self, name: &str) -> Result<Arc<EmbeddingTable>> {
        let path = self
            .read()
            .embeddings
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.path.clone())
            .ok_or_else(|| ServiceError::not_found("embeddings", name))?;
        self.load_table(&path)
    }

    /// Reads a vector file, sharing tables already loaded from the same path.
    pub fn load_table(&self, path: &Path) -> Result<Arc<EmbeddingTable>> {
        if let Some(t) = self.caches().embeddings.get(path) {
            return Ok(t.clone());
        }
        let table = Arc::new(load_embeddings(BufReader::new(File::open(path)?))?);
        self.caches().embeddings.insert(path.to_path_buf(), table.clone());
        Ok(table)
    }

    // models

    pub fn models(&self) -> Vec<ModelEntry> {
        self.read().models.clone()
    }

    pub fn add_model(&self, name: &str, file: ModelFile) -> Result<ModelEntry> {
        check_id("model", name)?;
        let kind = match file.model {
            RerankerModel::Lr(_) => RerankerKind::Lr,
            RerankerModel::Lstm(_) => RerankerKind::Lstm,
        };
        let file = Arc::new(file);
        let entry = self.update(|reg| {
            if reg.models.iter().any(|m| m.name == name) {
                return Err(ServiceError::Conflict {
                    kind: "model",
                    id: name.to_string(),
                });
            }
            write_atomic(
                &self.root.join("models").join(format!("{name}.json")),
                file.to_json()?.as_bytes(),
            )?;
            let entry = ModelEntry {
                name: name.to_string(),
                kind,
                created: Utc::now(),
            };
            reg.models.push(entry.clone());
            Ok(entry)
        })?;
        self.caches().models.insert(name.to_string(), file);
        Ok(entry)
    }

    /// The model called `name`, or the latest one of `kind`.
    pub fn model(&self, name: Option<&str>, kind: RerankerKind) -> Result<Arc<ModelFile>> {
        let entry = {
            let reg = self.read();
            match name {
                Some(n) => reg.models.iter().find(|m| m.name == n).cloned(),
                None => reg.models.iter().rev().find(|m| m.kind == kind).cloned(),
            }
        };
        let entry = entry.ok_or_else(|| {
            ServiceError::not_found("model", name.map_or_else(|| format!("(any {kind:?})"), str::to_string))
        })?;
        if entry.kind != kind {
            return Err(ServiceError::BadRequest(format!(
                "model `{}` is {:?}, not {kind:?}",
                entry.name, entry.kind
            )));
        }
        if let Some(m) = self.caches().models.get(&entry.name) {
            return Ok(m.clone());
        }
        let text = fs::read_to_string(self.root.join("models").join(format!("{}.json", entry.name)))?;
        let file = Arc::new(ModelFile::from_json(&text)?);
        self.caches().models.insert(entry.name.clone(), file.clone());
        Ok(file)
    }

    // queries

    pub fn queries(&self) -> Vec<StoredQuery> {
        self.read().queries.clone()
    }

    /// Registers a query. An empty id is replaced by the next free `q<n>`.
    pub fn add_query(&self, mut query: PropositionQuery) -> Result<StoredQuery> {
        if !query.id.is_empty() {
            check_id("query", &query.id)?;
        }
        self.update(|reg| {
            if query.id.is_empty() {
                query.id = next_free("q", |q| reg.queries.iter().any(|s| s.query.id == q));
            } else if reg.queries.iter().any(|s| s.query.id == query.id) {
                return Err(ServiceError::Conflict {
                    kind: "query",
                    id: query.id.clone(),
                });
            }
            let stored = StoredQuery {
                query,
                created: Utc::now(),
            };
            reg.queries.push(stored.clone());
            Ok(stored)
        })
    }

    pub fn query(&self, id: &str) -> Result<PropositionQuery> {
        self.read()
            .queries
            .iter()
            .find(|q| q.query.id == id)
            .map(|q| q.query.clone())
            .ok_or_else(|| ServiceError::not_found("query", id))
    }

    // ratings

    pub fn append_ratings(&self, ratings: &[RatingRecord]) -> Result<Vec<StoredRating>> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let now = Utc::now();
        let stored: Vec<StoredRating> = ratings
            .iter()
            .map(|r| StoredRating {
                rating: r.clone(),
                recorded_at: now,
            })
            .collect();
        let mut buf = Vec::new();
        for s in &stored {
            serde_json::to_writer(
                &mut buf,
                &RatingLine {
                    format_version: STORE_FORMAT_VERSION,
                    stored: s.clone(),
                },
            )?;
            buf.push(b'\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("ratings.jsonl"))?;
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(stored)
    }

    /// Every rating in the order recorded.
    pub fn ratings(&self) -> Result<Vec<StoredRating>> {
        let path = self.root.join("ratings.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: RatingLine = serde_json::from_str(&line)
                .map_err(|e| ServiceError::BadRequest(format!("ratings.jsonl line {}: {e}", i + 1)))?;
            check_version("rating", l.format_version)?;
            out.push(l.stored);
        }
        Ok(out)
    }
}

fn check_version(what: &str, v: u32) -> Result<()> {
    if v != STORE_FORMAT_VERSION {
        return Err(ServiceError::BadRequest(format!(
            "{what} file has unsupported format version {v}"
        )));
    }
    Ok(())
}
