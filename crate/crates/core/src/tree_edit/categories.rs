//! Tag and arc-label classes used by the edit features.
//!
//! Both Penn Treebank and Universal Dependencies tag sets are recognised.

pub fn is_noun(pos: &str) -> bool {
    pos.starts_with("NN") || pos == "NOUN"
}

pub fn is_proper_noun(pos: &str) -> bool {
    pos.starts_with("NNP") || pos == "PROPN"
}

pub fn is_verb(pos: &str) -> bool {
    pos.starts_with("VB") || pos == "VERB"
}

pub fn is_pronoun(pos: &str) -> bool {
    pos.starts_with("PRP") || pos == "PRON"
}

pub fn is_noun_or_verb(pos: &str) -> bool {
    is_noun(pos) || is_verb(pos)
}

/// Parses a numeric lemma such as `5.00`, `-3` or `1,200`.
pub fn parse_number(lemma: &str) -> Option<f64> {
    let cleaned: String = lemma.chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn is_numeric(pos: &str, lemma: &str) -> bool {
    pos == "CD" || pos == "NUM" || parse_number(lemma).is_some()
}

pub fn is_subject_label(deprel: &str) -> bool {
    matches!(deprel, "nsubj" | "nsubjpass" | "csubj" | "csubjpass")
}

pub fn is_object_label(deprel: &str) -> bool {
    matches!(deprel, "dobj" | "obj" | "iobj")
}

pub fn is_verb_complement_label(deprel: &str) -> bool {
    matches!(deprel, "xcomp" | "ccomp")
}

pub fn is_root_label(deprel: &str) -> bool {
    deprel == "root"
}

/// True when a numeric relabel moves the value by more than 5% of the old
/// value. Values that do not parse count as changed.
pub fn numeric_change_exceeds_tolerance(old: &str, new: &str) -> bool {
    const TOLERANCE: f64 = 0.05;
    const EPS: f64 = 1e-9;
    match (parse_number(old), parse_number(new)) {
        (Some(a), Some(b)) => (b - a).abs() / a.abs().max(EPS) > TOLERANCE,
        _ => old != new,
    }
}
