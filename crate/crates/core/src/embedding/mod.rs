//! Word vectors, sentence averages, cosine similarity and tf-idf.

mod table;
mod tfidf;

use serde::{Deserialize, Serialize};

pub use table::{load_embeddings, EmbeddingTable};
pub use tfidf::{fit_tfidf, TfIdfModel, TFIDF_FORMAT_VERSION};

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Mean word vector of the tokens' forms. See [`EmbeddingTable::avg_vector`].
pub fn avg_vector(tokens: &[Token], table: &EmbeddingTable) -> Vec<f64> {
    table.avg_vector(tokens)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    Ok(finish_cosine(dot, nu, nv))
}

fn finish_cosine(dot: f64, nu: f64, nv: f64) -> f64 {
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub(crate) fn from_sorted(entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Cosine similarity of two sparse vectors; 0 when either is empty or zero.
pub fn sparse_cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let nu: f64 = u.entries.iter().map(|(_, x)| x * x).sum();
    let nv: f64 = v.entries.iter().map(|(_, x)| x * x).sum();
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < u.entries.len() && j < v.entries.len() {
        let (a, x) = u.entries[i];
        let (b, y) = v.entries[j];
        match a.cmp(&b) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += x * y;
                i += 1;
                j += 1;
            }
        }
    }
    finish_cosine(dot, nu, nv)
}
