//! The 33 integer features summarizing an edit script.
//!
//! Order:
//!
//! | index | feature |
//! |---|---|
//! | 0 | script length |
//! | 1..=9 | count per edit kind, in [`EditKind::ALL`] order |
//! | 10, 11 | inserts of nouns-or-verbs, of proper nouns |
//! | 12..=17 | deletes of nouns-or-verbs, proper nouns, subject-, object-, verb-complement-, root-labelled nodes |
//! | 18..=22 | node relabels preserving POS, preserving lemma, noun/pronoun swaps, changing proper nouns, numeric changes over 5% |
//! | 23..=26 | edge relabels to or from subject, object, verb-complement, root labels |
//! | 27..=31 | unedited source nodes: total, numeric, verbs, nouns, proper nouns |
//! | 32 | 1 if a script was found |

use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::categories::*;
use super::ops::{EditKind, EditOp};
use super::search::{EditSequence, UneditedCounts};
use crate::corpus::DepTree;
use crate::error::Error;

pub const FEATURE_COUNT: usize = 33;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "length",
    "n_insert_child",
    "n_insert_parent",
    "n_delete_leaf",
    "n_delete_merge",
    "n_relabel_node",
    "n_relabel_edge",
    "n_move_subtree",
    "n_new_root",
    "n_move_sibling",
    "insert_noun_or_verb",
    "insert_proper",
    "delete_noun_or_verb",
    "delete_proper",
    "delete_subject",
    "delete_object",
    "delete_vcomp",
    "delete_root",
    "relabel_same_pos",
    "relabel_same_lemma",
    "relabel_noun_pronoun",
    "relabel_proper",
    "relabel_numeric_change",
    "edge_subject",
    "edge_object",
    "edge_vcomp",
    "edge_root",
    "unedited_total",
    "unedited_numeric",
    "unedited_verbs",
    "unedited_nouns",
    "unedited_proper",
    "found",
];

const INSERTS: usize = 10;
const DELETES: usize = 12;
const RELABELS: usize = 18;
const EDGES: usize = 23;
const UNEDITED: usize = 27;
const FOUND: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<u32>", try_from = "Vec<u32>")]
pub struct TreeEditFeatures(pub [u32; FEATURE_COUNT]);

impl From<TreeEditFeatures> for Vec<u32> {
    fn from(f: TreeEditFeatures) -> Self {
        f.0.to_vec()
    }
}

impl TryFrom<Vec<u32>> for TreeEditFeatures {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self, Error> {
        let found = v.len();
        v.try_into()
            .map(TreeEditFeatures)
            .map_err(|_| Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found,
            })
    }
}

impl TreeEditFeatures {
    pub fn values(&self) -> &[u32; FEATURE_COUNT] {
        &self.0
    }

    pub fn as_f64(&self) -> [f64; FEATURE_COUNT] {
        self.0.map(f64::from)
    }
}

impl Index<usize> for TreeEditFeatures {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

fn set_unedited(v: &mut [u32; FEATURE_COUNT], c: &UneditedCounts) {
    v[UNEDITED] = c.total;
    v[UNEDITED + 1] = c.numeric;
    v[UNEDITED + 2] = c.verbs;
    v[UNEDITED + 3] = c.nouns;
    v[UNEDITED + 4] = c.proper_nouns;
}

fn bump(v: &mut [u32; FEATURE_COUNT], i: usize, cond: bool) {
    v[i] += u32::from(cond);
}

/// Computes the feature vector for a script from `source` to `target`.
pub fn extract_features(seq: &EditSequence, source: &DepTree, _target: &DepTree) -> TreeEditFeatures {
    let mut v = [0u32; FEATURE_COUNT];
    if !seq.found {
        set_unedited(&mut v, &UneditedCounts::of_tree(source));
        return TreeEditFeatures(v);
    }
    v[0] = seq.ops.len() as u32;
    for (op, prior) in seq.ops.iter().zip(&seq.prior_labels) {
        v[1 + op.kind().index()] += 1;
        match op {
            EditOp::InsertChild { pos, .. } | EditOp::InsertParent { pos, .. } => {
                bump(&mut v, INSERTS, is_noun_or_verb(pos));
                bump(&mut v, INSERTS + 1, is_proper_noun(pos));
            }
            EditOp::DeleteLeaf { .. } | EditOp::DeleteMerge { .. } => {
                bump(&mut v, DELETES, is_noun_or_verb(&prior.pos));
                bump(&mut v, DELETES + 1, is_proper_noun(&prior.pos));
                bump(&mut v, DELETES + 2, is_subject_label(&prior.deprel));
                bump(&mut v, DELETES + 3, is_object_label(&prior.deprel));
                bump(&mut v, DELETES + 4, is_verb_complement_label(&prior.deprel));
                bump(&mut v, DELETES + 5, is_root_label(&prior.deprel));
            }
            EditOp::RelabelNode { lemma, pos, .. } => {
                let swaps = (is_noun(&prior.pos) && is_pronoun(pos)) || (is_pronoun(&prior.pos) && is_noun(pos));
                let proper = (is_proper_noun(&prior.pos) || is_proper_noun(pos)) && prior.lemma != *lemma;
                let numeric = is_numeric(&prior.pos, &prior.lemma) || is_numeric(pos, lemma);
                bump(&mut v, RELABELS, prior.pos == *pos);
                bump(&mut v, RELABELS + 1, prior.lemma == *lemma);
                bump(&mut v, RELABELS + 2, swaps);
                bump(&mut v, RELABELS + 3, proper);
                bump(
                    &mut v,
                    RELABELS + 4,
                    numeric && numeric_change_exceeds_tolerance(&prior.lemma, lemma),
                );
            }
            EditOp::RelabelEdge { deprel, .. } => {
                let either = |f: fn(&str) -> bool| f(&prior.deprel) || f(deprel);
                bump(&mut v, EDGES, either(is_subject_label));
                bump(&mut v, EDGES + 1, either(is_object_label));
                bump(&mut v, EDGES + 2, either(is_verb_complement_label));
                bump(&mut v, EDGES + 3, either(is_root_label));
            }
            EditOp::MoveSubtree { .. } | EditOp::NewRoot { .. } | EditOp::MoveSibling { .. } => {}
        }
    }
    debug_assert_eq!(v[1..=EditKind::COUNT].iter().sum::<u32>(), v[0]);
    set_unedited(&mut v, &seq.source_unedited);
    v[FOUND] = 1;
    TreeEditFeatures(v)
}
