//! Cheap first-stage scoring of every corpus sentence against a query.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{fallback_tokenize, Corpus, DepTree, Sentence, SentenceRef, Token};
use crate::embedding::{cosine, sparse_cosine, EmbeddingTable, SparseVector, TfIdfModel};
use crate::error::{Error, Result};

/// A natural-language proposition to look for.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropositionQuery {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub tree: Option<DepTree>,
}

impl PropositionQuery {
    /// Unparsed query tokenized with [`fallback_tokenize`].
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let tokens = fallback_tokenize(&text);
        Self::new(id.into(), text, tokens, None)
    }

    pub fn new(id: String, text: String, tokens: Vec<Token>, tree: Option<DepTree>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidRecord(format!("query `{id}` has no tokens")));
        }
        Ok(PropositionQuery { id, text, tokens, tree })
    }

    /// A query built from a sentence, keeping its parse.
    pub fn from_sentence(id: impl Into<String>, sentence: &Sentence) -> Result<Self> {
        Self::new(
            id.into(),
            sentence.text.clone(),
            sentence.tokens.clone(),
            sentence.tree.clone(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Averaging,
    Tfidf,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaging" | "avg" | "wv" => Ok(FilterKind::Averaging),
            "tfidf" | "tf-idf" => Ok(FilterKind::Tfidf),
            other => Err(Error::InvalidConfig(format!("unknown filter `{other}`"))),
        }
    }
}

/// The fast scorer: cosine of averaged word vectors or of tf-idf vectors.
#[derive(Clone, Copy, Debug)]
pub enum FastScorer<'a> {
    Averaging(&'a EmbeddingTable),
    TfIdf(&'a TfIdfModel),
}

enum Prepared {
    Dense(Vec<f64>),
    Sparse(SparseVector),
}

impl FastScorer<'_> {
    fn prepare(&self, tokens: &[Token]) -> Prepared {
        match self {
            FastScorer::Averaging(t) => Prepared::Dense(t.avg_vector(tokens)),
            FastScorer::TfIdf(m) => Prepared::Sparse(m.tfidf_vector(tokens)),
        }
    }

    fn against(&self, query: &Prepared, tokens: &[Token]) -> f64 {
        match (query, self.prepare(tokens)) {
            // Both vectors come from the same table, so lengths always agree.
            (Prepared::Dense(q), Prepared::Dense(s)) => cosine(q, &s).unwrap_or(0.0),
            (Prepared::Sparse(q), Prepared::Sparse(s)) => sparse_cosine(q, &s),
            _ => unreachable!("query prepared with a different scorer"),
        }
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            FastScorer::Averaging(_) => FilterKind::Averaging,
            FastScorer::TfIdf(_) => FilterKind::Tfidf,
        }
    }
}

/// Cosine between the query and sentence representations under `scorer`.
pub fn fast_score(query: &PropositionQuery, sentence: &Sentence, scorer: FastScorer<'_>) -> f64 {
    let q = scorer.prepare(&query.tokens);
    scorer.against(&q, &sentence.tokens)
}

/// Scores every sentence of `corpus`, in corpus order.
pub fn score_corpus(query: &PropositionQuery, corpus: &Corpus, scorer: FastScorer<'_>) -> Vec<f64> {
    let q = scorer.prepare(&query.tokens);
    let sentences: Vec<&Sentence> = corpus.sentences().map(|(_, s)| s).collect();
    sentences.par_iter().map(|s| scorer.against(&q, &s.tokens)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub sentence: SentenceRef,
    /// Position in corpus order.
    pub corpus_index: usize,
    pub fast_score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Descending score, then ascending corpus index.
pub(crate) fn rank_order(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Orders `(score, corpus_index)` pairs best first and keeps at most `k`.
pub(crate) fn select_top(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < scored.len() {
        scored.select_nth_unstable_by(k, |&a, &b| rank_order(a, b));
        scored.truncate(k);
    }
    scored.sort_unstable_by(|&a, &b| rank_order(a, b));
    scored
}

/// The `k` best-scoring sentences (all of them when `k >= |C|`), best first.
/// Equal scores keep corpus order.
pub fn top_k(
    query: &PropositionQuery,
    corpus: &Corpus,
    scorer: FastScorer<'_>,
    k: usize,
) -> Result<Vec<ScoredSentence>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores = score_corpus(query, corpus, scorer);
    let scored: Vec<(f64, usize)> = scores.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    let index = corpus.sentence_index();
    Ok(select_top(scored, k)
        .into_iter()
        .enumerate()
        .map(|(r, (score, i))| ScoredSentence {
            sentence: index[i].clone(),
            corpus_index: i,
            fast_score: score,
            rank: r + 1,
        })
        .collect())
}
