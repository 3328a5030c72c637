//! Natural language inference pairs recast as binary entailment examples.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::LabeledPair;
use crate::corpus::{ParsedSentence, Sentence};
use crate::error::{Error, Result};
use crate::filter::PropositionQuery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GoldLabel {
    Entailment,
    Contradiction,
    Neutral,
    /// Annotators did not agree (`-`).
    Unlabeled,
}

impl std::str::FromStr for GoldLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entailment" => Ok(GoldLabel::Entailment),
            "contradiction" => Ok(GoldLabel::Contradiction),
            "neutral" => Ok(GoldLabel::Neutral),
            "-" => Ok(GoldLabel::Unlabeled),
            other => Err(Error::BadLabel(other.to_string())),
        }
    }
}

impl GoldLabel {
    /// Binary label, or `None` for unlabeled pairs.
    pub fn entails(self) -> Option<bool> {
        match self {
            GoldLabel::Entailment => Some(true),
            GoldLabel::Contradiction | GoldLabel::Neutral => Some(false),
            GoldLabel::Unlabeled => None,
        }
    }
}

/// One line of an inference-pair JSONL file. Other fields are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnliRecord {
    pub gold_label: String,
    pub sentence1: String,
    pub sentence2: String,
    #[serde(rename = "pairID")]
    pub pair_id: String,
}

impl SnliRecord {
    pub fn gold(&self) -> Result<GoldLabel> {
        self.gold_label.parse()
    }

    pub fn premise_key(&self) -> String {
        format!("{}:premise", self.pair_id)
    }

    pub fn hypothesis_key(&self) -> String {
        format!("{}:hypothesis", self.pair_id)
    }
}

pub fn read_snli_jsonl<R: BufRead>(input: R) -> Result<Vec<SnliRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnliRecord =
            serde_json::from_str(&line).map_err(|e| Error::InvalidRecord(format!("line {}: {e}", i + 1)))?;
        rec.gold()?;
        out.push(rec);
    }
    Ok(out)
}

/// Premise becomes the candidate and hypothesis the query. Entailment is
/// positive, contradiction and neutral negative, and unlabeled records are
/// dropped. Parses are matched through their `sent_id`; those of records
/// not in `records` are ignored.
pub fn recast_snli(records: &[SnliRecord], parses: Vec<ParsedSentence>) -> Result<Vec<LabeledPair>> {
    let mut by_key: HashMap<String, ParsedSentence> = HashMap::with_capacity(parses.len());
    for p in parses {
        let key = p.sent_id.clone().ok_or_else(|| Error::MalformedParse {
            line: 0,
            reason: "parse block has no `# sent_id` comment".into(),
        })?;
        if by_key.insert(key.clone(), p).is_some() {
            return Err(Error::DuplicateId(key));
        }
    }
    let mut parsed = |key: String, text: &str| -> Result<Sentence> {
        let p = by_key.remove(&key).ok_or_else(|| Error::DanglingParse(key.clone()))?;
        let mut s = Sentence::from_text(key, 0, text);
        s.attach_parse(p.tokens, p.tree);
        Ok(s)
    };

    let mut out = Vec::new();
    for rec in records {
        let Some(label) = rec.gold()?.entails() else {
            continue;
        };
        let premise = parsed(rec.premise_key(), &rec.sentence1)?;
        let hypothesis = parsed(rec.hypothesis_key(), &rec.sentence2)?;
        let query = PropositionQuery::from_sentence(hypothesis.id.clone(), &hypothesis)?;
        out.push(LabeledPair::new(premise, query, label)?);
    }
    Ok(out)
}
