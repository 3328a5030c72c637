use std::collections::HashSet;
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{parse_conllu, Corpus, Document, ParsedSentence, Sentence, SentenceRef};
use crate::error::{Error, Result};

/// One line of the corpus JSONL format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    pub sentences: Vec<String>,
}

fn parse_date(doc: &str, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|e| Error::InvalidRecord(format!("document `{doc}`: bad date `{raw}`: {e}")))
}

/// Builds a corpus from document records, attaching any parses keyed
/// `docid:position` through their `sent_id`.
pub fn ingest_records(records: Vec<DocumentRecord>, parses: Vec<ParsedSentence>) -> Result<Corpus> {
    let mut seen = HashSet::new();
    let mut documents = Vec::with_capacity(records.len());
    for rec in records {
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        let date = match rec.date.as_deref() {
            Some(d) if !d.trim().is_empty() => Some(parse_date(&rec.id, d)?),
            _ => None,
        };
        let sentences = rec
            .sentences
            .into_iter()
            .enumerate()
            .map(|(p, text)| Sentence::from_text(format!("{}:{p}", rec.id), p, text))
            .collect();
        documents.push(Document {
            id: rec.id,
            date,
            source: rec.source,
            sentences,
        });
    }
    attach(&mut documents, parses)?;
    Corpus::new(documents)
}

fn attach(documents: &mut [Document], parses: Vec<ParsedSentence>) -> Result<()> {
    for parsed in parses {
        let key = parsed.sent_id.clone().ok_or_else(|| Error::MalformedParse {
            line: 0,
            reason: "parse block has no `# sent_id = docid:position` comment".into(),
        })?;
        let r = SentenceRef::parse_key(&key).ok_or_else(|| Error::DanglingParse(key.clone()))?;
        let sentence = documents
            .iter_mut()
            .find(|d| d.id == r.doc)
            .and_then(|d| d.sentences.get_mut(r.position))
            .ok_or_else(|| Error::DanglingParse(key.clone()))?;
        sentence.attach_parse(parsed.tokens, parsed.tree);
    }
    Ok(())
}

/// Reads a corpus from JSONL documents and an optional CoNLL-U parse stream.
pub fn ingest_corpus<D: BufRead, P: BufRead>(docs: D, parses: Option<P>) -> Result<Corpus> {
    let mut records = Vec::new();
    for (i, line) in docs.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord =
            serde_json::from_str(&line).map_err(|e| Error::InvalidRecord(format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    let parsed = match parses {
        Some(p) => parse_conllu(p)?,
        None => Vec::new(),
    };
    ingest_records(records, parsed)
}
