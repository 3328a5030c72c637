//! Per-edit input vectors for the sequence scorer.

use super::ops::{EditKind, EditOp};
use super::search::EditSequence;
use crate::embedding::EmbeddingTable;

/// Length of each step vector for a `dim`-dimensional embedding table.
pub fn step_dim(dim: usize) -> usize {
    EditKind::COUNT + dim
}

/// One vector per edit: a one-hot edit kind followed by a word-vector part.
///
/// The word part is the inserted lemma's vector for inserts, the negated
/// vector of the removed node's lemma for deletes, `new - old` for node
/// relabels and zeros for everything else. Lemmas missing from the table
/// contribute zeros. An empty script yields a single all-zero step.
pub fn vectorize_sequence(seq: &EditSequence, table: &EmbeddingTable) -> Vec<Vec<f64>> {
    let dim = table.dim();
    if seq.ops.is_empty() {
        return vec![vec![0.0; step_dim(dim)]];
    }
    seq.ops
        .iter()
        .zip(&seq.prior_labels)
        .map(|(op, prior)| {
            let mut step = vec![0.0; step_dim(dim)];
            step[op.kind().index()] = 1.0;
            let word = &mut step[EditKind::COUNT..];
            match op {
                EditOp::InsertChild { lemma, .. } | EditOp::InsertParent { lemma, .. } => {
                    word.copy_from_slice(&table.vector_or_zero(lemma));
                }
                EditOp::DeleteLeaf { .. } | EditOp::DeleteMerge { .. } => {
                    for (w, x) in word.iter_mut().zip(table.vector_or_zero(&prior.lemma)) {
                        *w = -x;
                    }
                }
                EditOp::RelabelNode { lemma, .. } => {
                    let old = table.vector_or_zero(&prior.lemma);
                    for ((w, new), old) in word.iter_mut().zip(table.vector_or_zero(lemma)).zip(old) {
                        *w = new - old;
                    }
                }
                _ => {}
            }
            step
        })
        .collect()
}
