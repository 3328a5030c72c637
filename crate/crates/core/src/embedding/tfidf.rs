use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::corpus::{Corpus, Token};
use crate::error::{Error, Result};

pub const TFIDF_FORMAT_VERSION: u32 = 1;

/// Sentence-level idf statistics.
///
/// `idf(w) = ln((1 + N) / (1 + df(w))) + 1`, where `N` is the number of
/// sentences seen at fit time and `df(w)` the number containing `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfIdfRepr", into = "TfIdfRepr")]
pub struct TfIdfModel {
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    n_sentences: usize,
}

#[derive(Serialize, Deserialize)]
struct TfIdfRepr {
    format_version: u32,
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
    n_sentences: usize,
}

impl TryFrom<TfIdfRepr> for TfIdfModel {
    type Error = Error;
    fn try_from(r: TfIdfRepr) -> Result<Self> {
        if r.format_version != TFIDF_FORMAT_VERSION {
            return Err(Error::InvalidRecord(format!(
                "unsupported tf-idf format version {}",
                r.format_version
            )));
        }
        let mut seen = vec![false; r.idf.len()];
        for &i in r.vocab.values() {
            match seen.get_mut(i) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::InvalidRecord(format!(
                        "vocabulary index {i} is out of range or repeated"
                    )))
                }
            }
        }
        if seen.iter().any(|s| !s) || r.idf.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidRecord("vocabulary and idf table disagree".into()));
        }
        Ok(TfIdfModel {
            vocab: r.vocab.into_iter().collect(),
            idf: r.idf,
            n_sentences: r.n_sentences,
        })
    }
}

impl From<TfIdfModel> for TfIdfRepr {
    fn from(m: TfIdfModel) -> Self {
        TfIdfRepr {
            format_version: TFIDF_FORMAT_VERSION,
            vocab: m.vocab.into_iter().collect(),
            idf: m.idf,
            n_sentences: m.n_sentences,
        }
    }
}

fn terms(tokens: &[Token]) -> impl Iterator<Item = String> + '_ {
    tokens.iter().map(|t| t.form.to_lowercase())
}

impl TfIdfModel {
    /// Fits idf weights over arbitrary token sequences, one per sentence.
    pub fn fit<'a, I>(sentences: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for tokens in sentences {
            n += 1;
            let unique: BTreeSet<String> = terms(tokens).collect();
            for w in unique {
                *df.entry(w).or_default() += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut vocab = HashMap::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (i, (w, d)) in df.into_iter().enumerate() {
            vocab.insert(w, i);
            idf.push(((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0);
        }
        Ok(TfIdfModel {
            vocab,
            idf,
            n_sentences: n,
        })
    }

    pub fn n_sentences(&self) -> usize {
        self.n_sentences
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn idf(&self, word: &str) -> Option<f64> {
        self.vocab.get(word).map(|&i| self.idf[i])
    }

    /// Raw term counts times idf; words outside the fitted vocabulary are dropped.
    pub fn tfidf_vector(&self, tokens: &[Token]) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for w in terms(tokens) {
            if let Some(&i) = self.vocab.get(&w) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        SparseVector::from_sorted(counts.into_iter().map(|(i, tf)| (i, tf * self.idf[i])).collect())
    }
}

/// Fits a sentence-level tf-idf model on every sentence of `corpus`.
pub fn fit_tfidf(corpus: &Corpus) -> Result<TfIdfModel> {
    TfIdfModel::fit(corpus.sentences().map(|(_, s)| s.tokens.as_slice()))
}
