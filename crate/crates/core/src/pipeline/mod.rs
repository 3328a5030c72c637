//! The filter-then-rerank cascade and the evaluation harness around it.

mod agreement;
mod measure;
mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use agreement::{krippendorff_alpha_interval, read_ratings_csv, write_ratings_csv, RatingRecord};
pub use measure::{measure, quarter_start, MeasurementSeries};
pub use metrics::{
    precision_at_n, read_frame_annotations, read_frame_queries, read_recall_fixture, recall_at_n, FrameAnnotations,
    FrameQuery, PrecisionReport, RecallInstance, RecallRecord,
};

use crate::corpus::{Corpus, DepTree, SentenceRef};
use crate::embedding::{EmbeddingTable, TfIdfModel};
use crate::error::{Error, Result};
use crate::filter::{top_k, FastScorer, FilterKind, PropositionQuery, ScoredSentence};
use crate::models::{lr_score, lstm_score, LRModel, LSTMModel};
use crate::tree_edit::{extract_features, find_edit_sequence, step_dim, vectorize_sequence, SearchConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankerKind {
    #[default]
    None,
    Lr,
    Lstm,
}

impl std::str::FromStr for RerankerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RerankerKind::None),
            "lr" => Ok(RerankerKind::Lr),
            "lstm" => Ok(RerankerKind::Lstm),
            other => Err(Error::InvalidConfig(format!("unknown reranker `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filter: FilterKind,
    pub reranker: RerankerKind,
    /// Filter width.
    pub k: usize,
    /// Output size.
    pub n: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            filter: FilterKind::Averaging,
            reranker: RerankerKind::None,
            k: 250,
            n: 25,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.k {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n <= k, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

/// What the cascade may draw on. Only the parts the configuration names
/// are needed.
#[derive(Clone, Copy, Debug, Default)]
pub struct Resources<'a> {
    pub embeddings: Option<&'a EmbeddingTable>,
    pub tfidf: Option<&'a TfIdfModel>,
    pub lr: Option<&'a LRModel>,
    pub lstm: Option<&'a LSTMModel>,
    pub search: SearchConfig,
}

impl<'a> Resources<'a> {
    fn missing(what: &str) -> Error {
        Error::MissingResource(what.to_string())
    }

    pub fn scorer(&self, kind: FilterKind) -> Result<FastScorer<'a>> {
        match kind {
            FilterKind::Averaging => self
                .embeddings
                .map(FastScorer::Averaging)
                .ok_or_else(|| Self::missing("word vectors")),
            FilterKind::Tfidf => self
                .tfidf
                .map(FastScorer::TfIdf)
                .ok_or_else(|| Self::missing("tf-idf model")),
        }
    }

    fn reranker(&self, kind: RerankerKind) -> Result<Option<Reranker<'a>>> {
        Ok(match kind {
            RerankerKind::None => None,
            RerankerKind::Lr => Some(Reranker::Lr(self.lr.ok_or_else(|| Self::missing("LR model"))?)),
            RerankerKind::Lstm => {
                let model = self.lstm.ok_or_else(|| Self::missing("LSTM model"))?;
                let table = self.embeddings.ok_or_else(|| Self::missing("word vectors"))?;
                if model.input_dim != step_dim(table.dim()) {
                    return Err(Error::DimensionMismatch {
                        expected: model.input_dim,
                        found: step_dim(table.dim()),
                    });
                }
                Some(Reranker::Lstm(model, table))
            }
        })
    }
}

#[derive(Clone, Copy)]
enum Reranker<'a> {
    Lr(&'a LRModel),
    Lstm(&'a LSTMModel, &'a EmbeddingTable),
}

impl Reranker<'_> {
    fn score(&self, candidate: &DepTree, query: &DepTree, search: &SearchConfig) -> Result<f64> {
        let seq = find_edit_sequence(candidate, query, search);
        match *self {
            Reranker::Lr(m) => lr_score(&extract_features(&seq, candidate, query), m),
            Reranker::Lstm(m, table) => lstm_score(&vectorize_sequence(&seq, table), m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub sentence: SentenceRef,
    pub corpus_index: usize,
    pub fast_score: f64,
    /// Entailment score; for unparsed candidates this is the fast score.
    pub rerank_score: Option<f64>,
    /// 1-based.
    pub final_rank: usize,
    /// Set when a reranker was asked for but the query or the candidate had
    /// no parse.
    pub unparsed: bool,
}

impl RankedMatch {
    fn key(&self) -> f64 {
        self.rerank_score.unwrap_or(self.fast_score)
    }
}

/// Scores `candidates` with the configured reranker and returns them best
/// first. Ties keep corpus order.
pub fn rerank(
    query: &PropositionQuery,
    corpus: &Corpus,
    candidates: &[ScoredSentence],
    reranker: RerankerKind,
    resources: &Resources<'_>,
) -> Result<Vec<RankedMatch>> {
    let model = resources.reranker(reranker)?;
    let mut out: Vec<RankedMatch> = candidates
        .par_iter()
        .map(|c| {
            let base = RankedMatch {
                sentence: c.sentence.clone(),
                corpus_index: c.corpus_index,
                fast_score: c.fast_score,
                rerank_score: None,
                final_rank: 0,
                unparsed: false,
            };
            let Some(model) = model else {
                return Ok(base);
            };
            let tree = corpus.sentence_at(c.corpus_index).and_then(|(_, s)| s.tree.as_ref());
            Ok(match (tree, query.tree.as_ref()) {
                (Some(s), Some(q)) => RankedMatch {
                    rerank_score: Some(model.score(s, q, &resources.search)?),
                    ..base
                },
                _ => RankedMatch {
                    rerank_score: Some(c.fast_score),
                    unparsed: true,
                    ..base
                },
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| b.key().total_cmp(&a.key()).then(a.corpus_index.cmp(&b.corpus_index)));
    for (r, m) in out.iter_mut().enumerate() {
        m.final_rank = r + 1;
    }
    Ok(out)
}

/// Takes the `k` best sentences under the fast filter, reranks them and
/// keeps the top `n`. A `k` larger than the corpus is clamped.
pub fn match_query(
    query: &PropositionQuery,
    corpus: &Corpus,
    config: &PipelineConfig,
    resources: &Resources<'_>,
) -> Result<Vec<RankedMatch>> {
    config.validate()?;
    let scorer = resources.scorer(config.filter)?;
    let survivors = top_k(query, corpus, scorer, config.k)?;
    let mut ranked = rerank(query, corpus, &survivors, config.reranker, resources)?;
    ranked.truncate(config.n);
    Ok(ranked)
}
