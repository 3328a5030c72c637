//! Edit scripts between dependency trees and the features derived from them.

mod categories;
mod features;
mod ops;
mod search;
mod vectorize;

pub use categories::{
    is_noun, is_numeric, is_object_label, is_pronoun, is_proper_noun, is_root_label, is_subject_label, is_verb,
    is_verb_complement_label, numeric_change_exceeds_tolerance, parse_number,
};
pub use features::{extract_features, TreeEditFeatures, FEATURE_COUNT, FEATURE_NAMES};
pub use ops::{apply_edit, EditKind, EditOp, SiblingPosition};
pub use search::{find_edit_sequence, heuristic, EditSequence, SearchConfig, UneditedCounts};
pub use vectorize::{step_dim, vectorize_sequence};
