//! Operations shared by the command line and the HTTP service, so both
//! produce the same results from the same inputs.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use propmatch_core::corpus::{ingest_records, Corpus, DocumentRecord, ParsedSentence};
use propmatch_core::embedding::{fit_tfidf, EmbeddingTable, TfIdfModel};
use propmatch_core::filter::{top_k, FilterKind, PropositionQuery};
use propmatch_core::models::{
    read_snli_jsonl, recast_snli, train_lr, train_lstm, ModelFile, RerankerModel, TrainConfig, TrainWarning,
};
use propmatch_core::pipeline::{
    krippendorff_alpha_interval, measure, precision_at_n, recall_at_n, rerank, FrameAnnotations, FrameQuery,
    MeasurementSeries, PipelineConfig, PrecisionReport, RankedMatch, RatingRecord, RecallInstance, RerankerKind,
    Resources,
};
use propmatch_core::tree_edit::SearchConfig;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Result, ServiceError};
use crate::store::{CorpusEntry, ModelEntry, ProjectStore};

pub struct App {
    pub store: ProjectStore,
    pub config: Config,
}

/// Knobs of one matching run. Unset fields fall back to the configured
/// defaults, the latest corpus and the latest model of the requested kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    pub corpus: Option<String>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub filter: Option<FilterKind>,
    pub rerank: Option<RerankerKind>,
    pub model: Option<String>,
    pub embeddings: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub rank: usize,
    pub doc: String,
    pub position: usize,
    pub date: Option<NaiveDate>,
    pub source: Option<String>,
    pub fast_score: f64,
    pub rerank_score: Option<f64>,
    pub unparsed: bool,
    pub sentence: String,
    /// Neighbouring sentences of the same document, if any.
    pub before: Option<String>,
    pub after: Option<String>,
}

/// Output of [`App::ranked`].
pub struct Ranked {
    pub matches: Vec<RankedMatch>,
    pub corpus: Arc<Corpus>,
    pub corpus_id: String,
    pub config: PipelineConfig,
    pub model: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResponse {
    pub query: String,
    pub corpus: String,
    pub filter: FilterKind,
    pub rerank: RerankerKind,
    pub model: Option<String>,
    pub k: usize,
    pub n: usize,
    pub matches: Vec<MatchRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResponse {
    pub query: String,
    pub corpus: String,
    pub n: usize,
    #[serde(flatten)]
    pub series: MeasurementSeries,
}

/// Where training pairs come from: SNLI-style JSONL plus CoNLL-U parses of
/// both sides, keyed `pairID:premise` and `pairID:hypothesis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub kind: RerankerKind,
    pub name: String,
    pub pairs: PathBuf,
    pub parses: PathBuf,
    #[serde(default)]
    pub embeddings: Option<String>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub search: SearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: ModelEntry,
    pub examples: usize,
    pub warnings: Vec<TrainWarning>,
    pub epoch_losses: Vec<f64>,
}

/// Everything one run needs, owned so that `Resources` can borrow from it.
struct Loaded {
    table: Option<Arc<EmbeddingTable>>,
    tfidf: Option<Arc<TfIdfModel>>,
    model: Option<(String, Arc<ModelFile>)>,
}

impl Loaded {
    fn resources(&self) -> Resources<'_> {
        let (lr, lstm, search) = match self.model.as_ref().map(|(_, m)| &**m) {
            Some(ModelFile {
                model: RerankerModel::Lr(m),
                search,
                ..
            }) => (Some(m), None, *search),
            Some(ModelFile {
                model: RerankerModel::Lstm(m),
                search,
                ..
            }) => (None, Some(m), *search),
            None => (None, None, SearchConfig::default()),
        };
        Resources {
            embeddings: self.table.as_deref(),
            tfidf: self.tfidf.as_deref(),
            lr,
            lstm,
            search,
        }
    }
}

fn read_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
}

pub fn parse_conllu_file(path: &Path) -> Result<Vec<ParsedSentence>> {
    Ok(propmatch_core::corpus::parse_conllu(read_file(path)?)?)
}

pub fn read_document_records(path: &Path) -> Result<Vec<DocumentRecord>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in read_file(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ServiceError::BadRequest(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

impl App {
    pub fn new(store: ProjectStore, config: Config) -> Self {
        App { store, config }
    }

    pub fn pipeline_config(&self, p: &MatchParams) -> PipelineConfig {
        let d = &self.config.defaults;
        PipelineConfig {
            filter: p.filter.unwrap_or(d.filter),
            reranker: p.rerank.unwrap_or(d.rerank),
            k: p.k.unwrap_or(d.k),
            n: p.n.unwrap_or(d.n),
        }
    }

    /// Named vectors, else the latest registered ones, else the configured file.
    pub fn embeddings(&self, name: Option<&str>) -> Result<Option<Arc<EmbeddingTable>>> {
        if let Some(name) = name {
            return self.store.embeddings(name).map(Some);
        }
        if let Some(e) = self.store.embeddings_entries().last() {
            return self.store.embeddings(&e.name).map(Some);
        }
        match &self.config.embeddings {
            Some(path) => self.store.load_table(path).map(Some),
            None => Ok(None),
        }
    }

    fn require_embeddings(&self, name: Option<&str>) -> Result<Arc<EmbeddingTable>> {
        self.embeddings(name)?.ok_or_else(|| {
            ServiceError::Core(propmatch_core::Error::MissingResource(
                "word vectors (register them with `embed` or set `embeddings` in the config)".into(),
            ))
        })
    }

    fn load(
        &self,
        cfg: &PipelineConfig,
        p: &MatchParams,
        tfidf: impl FnOnce() -> Result<Arc<TfIdfModel>>,
    ) -> Result<Loaded> {
        let needs_table = cfg.filter == FilterKind::Averaging || cfg.reranker == RerankerKind::Lstm;
        Ok(Loaded {
            table: if needs_table {
                Some(self.require_embeddings(p.embeddings.as_deref())?)
            } else {
                None
            },
            tfidf: if cfg.filter == FilterKind::Tfidf {
                Some(tfidf()?)
            } else {
                None
            },
            model: match cfg.reranker {
                RerankerKind::None => None,
                kind => {
                    let m = self.store.model(p.model.as_deref(), kind)?;
                    let name = match &p.model {
                        Some(n) => n.clone(),
                        None => self
                            .store
                            .models()
                            .iter()
                            .rev()
                            .find(|e| e.kind == kind)
                            .map(|e| e.name.clone())
                            .expect("model was found"),
                    };
                    Some((name, m))
                }
            },
        })
    }

    /// Parses `text` with the hook when one is configured.
    pub fn make_query(&self, id: Option<String>, text: String) -> Result<PropositionQuery> {
        let id = id.unwrap_or_default();
        match self.config.parser.parse(std::slice::from_ref(&text))? {
            Some(mut parsed) => {
                let p = parsed.pop().expect("one parse per sentence");
                Ok(PropositionQuery::new(id, text, p.tokens, Some(p.tree))?)
            }
            None => Ok(PropositionQuery::from_text(id, text)?),
        }
    }

    pub fn register_query(&self, id: Option<String>, text: String) -> Result<PropositionQuery> {
        let q = self.make_query(id, text)?;
        Ok(self.store.add_query(q)?.query)
    }

    /// Builds and registers a corpus. Without explicit parses the hook, if
    /// configured, parses every sentence.
    pub fn ingest(
        &self,
        id: Option<&str>,
        records: Vec<DocumentRecord>,
        parses: Option<Vec<ParsedSentence>>,
    ) -> Result<CorpusEntry> {
        let parses = match parses {
            Some(p) => p,
            None => {
                let keys: Vec<String> = records
                    .iter()
                    .flat_map(|r| (0..r.sentences.len()).map(move |i| format!("{}:{i}", r.id)))
                    .collect();
                let texts: Vec<String> = records.iter().flat_map(|r| r.sentences.iter().cloned()).collect();
                match self.config.parser.parse(&texts)? {
                    Some(parsed) => parsed
                        .into_iter()
                        .zip(keys)
                        .map(|(p, k)| ParsedSentence { sent_id: Some(k), ..p })
                        .collect(),
                    None => Vec::new(),
                }
            }
        };
        let corpus = ingest_records(records, parses)?;
        self.store.add_corpus(id, corpus)
    }

    fn corpus_id(&self, p: &MatchParams) -> Result<String> {
        match &p.corpus {
            Some(c) => Ok(c.clone()),
            None => self
                .store
                .latest_corpus()
                .ok_or_else(|| ServiceError::not_found("corpus", "(none registered)")),
        }
    }

    /// Runs the cascade and returns the top `n` with the corpus they index.
    pub fn ranked(&self, query: &PropositionQuery, p: &MatchParams, strict: bool) -> Result<Ranked> {
        let cfg = self.pipeline_config(p);
        cfg.validate()?;
        let corpus_id = self.corpus_id(p)?;
        let corpus = self.store.corpus(&corpus_id)?;
        let loaded = self.load(&cfg, p, || self.store.tfidf(&corpus_id))?;
        let resources = loaded.resources();
        let survivors = top_k(query, &corpus, resources.scorer(cfg.filter)?, cfg.k)?;
        let mut ranked = rerank(query, &corpus, &survivors, cfg.reranker, &resources)?;
        if strict && cfg.reranker != RerankerKind::None {
            if query.tree.is_none() {
                return Err(ServiceError::Unparsed(format!(
                    "query `{}` has no parse; configure a parser hook or use rerank=none",
                    query.id
                )));
            }
            if let Some(m) = ranked.iter().find(|m| m.unparsed) {
                return Err(ServiceError::Unparsed(format!("candidate {} has no parse", m.sentence)));
            }
        }
        ranked.truncate(cfg.n);
        Ok(Ranked {
            matches: ranked,
            corpus,
            corpus_id,
            config: cfg,
            model: loaded.model.map(|(n, _)| n),
        })
    }

    pub fn run_match(&self, query: &PropositionQuery, p: &MatchParams, strict: bool) -> Result<MatchResponse> {
        let Ranked {
            matches: ranked,
            corpus,
            corpus_id,
            config: cfg,
            model,
        } = self.ranked(query, p, strict)?;
        let matches = ranked.iter().map(|m| match_row(m, &corpus)).collect();
        Ok(MatchResponse {
            query: query.id.clone(),
            corpus: corpus_id,
            filter: cfg.filter,
            rerank: cfg.reranker,
            model,
            k: cfg.k,
            n: cfg.n,
            matches,
        })
    }

    /// Quarterly counts of the top `n` matches. `k` is raised to `n` when the
    /// configured default is smaller.
    pub fn run_measure(&self, query: &PropositionQuery, p: &MatchParams, strict: bool) -> Result<MeasurementResponse> {
        let mut p = p.clone();
        if p.k.is_none() {
            let n = p.n.unwrap_or(self.config.defaults.n);
            p.k = Some(self.config.defaults.k.max(n));
        }
        let Ranked {
            matches: ranked,
            corpus,
            corpus_id,
            config: cfg,
            ..
        } = self.ranked(query, &p, strict)?;
        Ok(MeasurementResponse {
            query: query.id.clone(),
            corpus: corpus_id,
            n: cfg.n,
            series: measure(&ranked, &corpus),
        })
    }

    /// Recall at each `n` on per-document instances. The tf-idf filter is
    /// fitted on each instance's own document.
    pub fn eval_recall(
        &self,
        instances: &[RecallInstance],
        ns: &[usize],
        p: &MatchParams,
    ) -> Result<Vec<(usize, f64)>> {
        let mut cfg = self.pipeline_config(p);
        let max_n = ns.iter().copied().max().unwrap_or(1);
        cfg.k = cfg.k.max(max_n);
        cfg.n = cfg.k;
        let loaded = self.load(&cfg, p, || Err(ServiceError::BadRequest("unused".into())))?;
        let rank = |q: &PropositionQuery, doc: &Corpus| -> propmatch_core::Result<Vec<usize>> {
            let local;
            let mut resources = loaded.resources();
            if cfg.filter == FilterKind::Tfidf {
                local = fit_tfidf(doc)?;
                resources.tfidf = Some(&local);
            }
            let survivors = top_k(q, doc, resources.scorer(cfg.filter)?, cfg.k)?;
            Ok(rerank(q, doc, &survivors, cfg.reranker, &resources)?
                .into_iter()
                .map(|m| m.corpus_index)
                .collect())
        };
        ns.iter().map(|&n| Ok((n, recall_at_n(instances, rank, n)?))).collect()
    }

    /// Frame precision of the top `n` matches in a registered corpus.
    pub fn eval_precision(
        &self,
        queries: &[FrameQuery],
        annotations: &FrameAnnotations,
        ns: &[usize],
        p: &MatchParams,
    ) -> Result<Vec<(usize, PrecisionReport)>> {
        let mut cfg = self.pipeline_config(p);
        let max_n = ns.iter().copied().max().unwrap_or(1);
        cfg.k = cfg.k.max(max_n);
        cfg.n = cfg.k;
        let corpus_id = self.corpus_id(p)?;
        let corpus = self.store.corpus(&corpus_id)?;
        let loaded = self.load(&cfg, p, || self.store.tfidf(&corpus_id))?;
        let resources = loaded.resources();
        let rank = |q: &PropositionQuery, c: &Corpus| -> propmatch_core::Result<Vec<usize>> {
            let survivors = top_k(q, c, resources.scorer(cfg.filter)?, cfg.k)?;
            Ok(rerank(q, c, &survivors, cfg.reranker, &resources)?
                .into_iter()
                .map(|m| m.corpus_index)
                .collect())
        };
        ns.iter()
            .map(|&n| Ok((n, precision_at_n(queries, &corpus, annotations, rank, n)?)))
            .collect()
    }

    pub fn train(&self, req: &TrainRequest) -> Result<TrainOutcome> {
        crate::store::check_id("model", &req.name)?;
        if self.store.models().iter().any(|m| m.name == req.name) {
            return Err(ServiceError::Conflict {
                kind: "model",
                id: req.name.clone(),
            });
        }
        let records = read_snli_jsonl(read_file(&req.pairs)?)?;
        let pairs = recast_snli(&records, parse_conllu_file(&req.parses)?)?;
        let (model, warnings, epoch_losses) = match req.kind {
            RerankerKind::Lr => {
                let t = train_lr(&pairs, &req.search, &req.train)?;
                (RerankerModel::Lr(t.model), t.warnings, t.epoch_losses)
            }
            RerankerKind::Lstm => {
                let table = self.require_embeddings(req.embeddings.as_deref())?;
                let t = train_lstm(&pairs, &table, &req.search, &req.train)?;
                (RerankerModel::Lstm(t.model), t.warnings, t.epoch_losses)
            }
            RerankerKind::None => return Err(ServiceError::BadRequest("kind must be `lr` or `lstm`".into())),
        };
        let entry = self.store.add_model(&req.name, ModelFile::new(model, req.search))?;
        Ok(TrainOutcome {
            model: entry,
            examples: pairs.len(),
            warnings,
            epoch_losses,
        })
    }

    /// Agreement over all ratings, or those of one query.
    pub fn alpha(&self, query: Option<&str>) -> Result<f64> {
        let ratings: Vec<RatingRecord> = self
            .store
            .ratings()?
            .into_iter()
            .map(|s| s.rating)
            .filter(|r| query.is_none_or(|q| r.query == q))
            .collect();
        Ok(krippendorff_alpha_interval(&ratings)?)
    }
}

pub fn match_row(m: &RankedMatch, corpus: &Corpus) -> MatchRow {
    let doc = corpus.document(&m.sentence.doc);
    let sentence = corpus.sentence(&m.sentence);
    let (before, after) = corpus.context(&m.sentence);
    MatchRow {
        rank: m.final_rank,
        doc: m.sentence.doc.clone(),
        position: m.sentence.position,
        date: doc.and_then(|d| d.date),
        source: doc.and_then(|d| d.source.clone()),
        fast_score: m.fast_score,
        rerank_score: m.rerank_score,
        unparsed: m.unparsed,
        sentence: sentence.map(|s| s.text.clone()).unwrap_or_default(),
        before: before.map(|s| s.text.clone()),
        after: after.map(|s| s.text.clone()),
    }
}

/// Parses `1,5,10` into a list of cut-offs.
pub fn parse_ns(s: &str) -> Result<Vec<usize>> {
    let ns: Vec<usize> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| ServiceError::BadRequest(format!("`{x}` is not a positive integer")))
        })
        .collect::<Result<_>>()?;
    if ns.is_empty() {
        return Err(ServiceError::BadRequest("no cut-offs given".into()));
    }
    Ok(ns)
}
