//! Retrieval metrics: instance-level recall at n and frame precision at n.
//!
//! Both take a ranking function returning corpus indices best first, so the
//! fast filter alone and the full cascade are evaluated the same way.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{ingest_records, Corpus, DocumentRecord};
use crate::error::{Error, Result};
use crate::filter::PropositionQuery;

/// One line of a recall fixture: a query, the sentences of one document and
/// the indices of the sentences that answer it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallRecord {
    pub query: String,
    pub sentences: Vec<String>,
    pub relevant: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RecallInstance {
    pub query: PropositionQuery,
    /// The document, as a one-document corpus.
    pub document: Corpus,
    pub relevant: BTreeSet<usize>,
}

impl RecallInstance {
    pub fn from_record(id: &str, rec: RecallRecord) -> Result<Self> {
        let query = PropositionQuery::from_text(id, rec.query)?;
        let n = rec.sentences.len();
        let document = ingest_records(
            vec![DocumentRecord {
                id: id.to_string(),
                date: None,
                source: None,
                sentences: rec.sentences,
            }],
            Vec::new(),
        )?;
        let inst = RecallInstance {
            query,
            document,
            relevant: rec.relevant.into_iter().collect(),
        };
        inst.check()?;
        debug_assert_eq!(inst.document.len(), n);
        Ok(inst)
    }

    fn check(&self) -> Result<()> {
        if self.relevant.is_empty() {
            return Err(Error::BadInstance(format!(
                "`{}` has no relevant sentence",
                self.query.id
            )));
        }
        if let Some(&i) = self.relevant.iter().find(|&&i| i >= self.document.len()) {
            return Err(Error::BadInstance(format!(
                "`{}` marks sentence {i} relevant but has {} sentences",
                self.query.id,
                self.document.len()
            )));
        }
        Ok(())
    }
}

/// Reads a recall fixture; instance ids are `r<line number>`.
pub fn read_recall_fixture<R: BufRead>(input: R) -> Result<Vec<RecallInstance>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecallRecord =
            serde_json::from_str(&line).map_err(|e| Error::InvalidRecord(format!("line {}: {e}", i + 1)))?;
        out.push(RecallInstance::from_record(&format!("r{}", i + 1), rec)?);
    }
    Ok(out)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of instances with at least one relevant sentence in the top `n`.
pub fn recall_at_n<F>(instances: &[RecallInstance], rank: F, n: usize) -> Result<f64>
where
    F: Fn(&PropositionQuery, &Corpus) -> Result<Vec<usize>>,
{
    check_n(n)?;
    if instances.is_empty() {
        return Err(Error::InsufficientData("no recall instances".into()));
    }
    let mut hits = 0usize;
    for inst in instances {
        inst.check()?;
        let ranking = rank(&inst.query, &inst.document)?;
        if ranking.iter().take(n).any(|i| inst.relevant.contains(i)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameQuery {
    pub query: PropositionQuery,
    pub frame: String,
}

#[derive(Deserialize)]
struct FrameQueryLine {
    id: String,
    text: String,
    frame: String,
}

#[derive(Deserialize)]
struct AnnotationLine {
    sentence: String,
    labels: Vec<String>,
}

/// Sentence-level frame labels keyed by `docid:position`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAnnotations {
    pub labels: HashMap<String, BTreeSet<String>>,
}

impl FrameAnnotations {
    pub fn frames(&self) -> BTreeSet<&str> {
        self.labels.values().flatten().map(String::as_str).collect()
    }

    pub fn has(&self, sentence: &str, frame: &str) -> bool {
        self.labels.get(sentence).is_some_and(|l| l.contains(frame))
    }
}

fn jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::InvalidRecord(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Lines of `{"sentence": "doc:pos", "labels": [...]}`; repeated sentences
/// merge their labels.
pub fn read_frame_annotations<R: BufRead>(input: R) -> Result<FrameAnnotations> {
    let mut ann = FrameAnnotations::default();
    for line in jsonl::<AnnotationLine, _>(input)? {
        ann.labels.entry(line.sentence).or_default().extend(line.labels);
    }
    Ok(ann)
}

/// Lines of `{"id": ..., "text": ..., "frame": ...}`.
pub fn read_frame_queries<R: BufRead>(input: R) -> Result<Vec<FrameQuery>> {
    jsonl::<FrameQueryLine, _>(input)?
        .into_iter()
        .map(|l| {
            Ok(FrameQuery {
                query: PropositionQuery::from_text(l.id, l.text)?,
                frame: l.frame,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    /// Query id and its precision, in input order.
    pub per_query: Vec<(String, f64)>,
    pub macro_average: f64,
}

/// Share of the top `n` sentences labeled with each query's frame (always
/// divided by `n`), and its mean over queries.
pub fn precision_at_n<F>(
    queries: &[FrameQuery],
    corpus: &Corpus,
    annotations: &FrameAnnotations,
    rank: F,
    n: usize,
) -> Result<PrecisionReport>
where
    F: Fn(&PropositionQuery, &Corpus) -> Result<Vec<usize>>,
{
    check_n(n)?;
    if queries.is_empty() {
        return Err(Error::InsufficientData("no frame queries".into()));
    }
    let known = annotations.frames();
    let index = corpus.sentence_index();
    let mut per_query = Vec::with_capacity(queries.len());
    for q in queries {
        if !known.contains(q.frame.as_str()) {
            return Err(Error::BadLabel(q.frame.clone()));
        }
        let ranking = rank(&q.query, corpus)?;
        let hits = ranking
            .iter()
            .take(n)
            .filter(|&&i| annotations.has(&index[i].to_string(), &q.frame))
            .count();
        per_query.push((q.query.id.clone(), hits as f64 / n as f64));
    }
    let macro_average = per_query.iter().map(|(_, p)| p).sum::<f64>() / per_query.len() as f64;
    Ok(PrecisionReport {
        per_query,
        macro_average,
    })
}
