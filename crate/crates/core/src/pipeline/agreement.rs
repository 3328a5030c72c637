//! Human ratings of matches and their inter-rater agreement.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRef;
use crate::error::{Error, Result};

/// One rater's 1 to 5 judgement of how fully a sentence expresses a query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RatingRow", into = "RatingRow")]
pub struct RatingRecord {
    pub rater: String,
    pub query: String,
    pub sentence: SentenceRef,
    pub score: u8,
}

#[derive(Clone, Serialize, Deserialize)]
struct RatingRow {
    rater: String,
    query: String,
    doc: String,
    position: usize,
    score: u8,
}

impl TryFrom<RatingRow> for RatingRecord {
    type Error = Error;
    fn try_from(r: RatingRow) -> Result<Self> {
        RatingRecord::new(r.rater, r.query, SentenceRef::new(r.doc, r.position), r.score)
    }
}

impl From<RatingRecord> for RatingRow {
    fn from(r: RatingRecord) -> Self {
        RatingRow {
            rater: r.rater,
            query: r.query,
            doc: r.sentence.doc,
            position: r.sentence.position,
            score: r.score,
        }
    }
}

impl RatingRecord {
    pub fn new(rater: impl Into<String>, query: impl Into<String>, sentence: SentenceRef, score: u8) -> Result<Self> {
        if !(1..=5).contains(&score) {
            return Err(Error::InvalidRecord(format!("rating {score} is outside 1..=5")));
        }
        Ok(RatingRecord {
            rater: rater.into(),
            query: query.into(),
            sentence,
            score,
        })
    }
}

/// Reads `rater,query,doc,position,score` rows with a header line.
pub fn read_ratings_csv<R: Read>(input: R) -> Result<Vec<RatingRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize::<RatingRow>()
        .map(|row| RatingRecord::try_from(row.map_err(|e| Error::InvalidRecord(e.to_string()))?))
        .collect()
}

pub fn write_ratings_csv<W: Write>(ratings: &[RatingRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in ratings {
        w.serialize(RatingRow::from(r.clone()))?;
    }
    w.flush()?;
    Ok(())
}

/// Krippendorff's alpha with the interval (squared difference) metric.
///
/// Items are (query, sentence) pairs; only items rated at least twice are
/// pairable. With `n` pairable values,
/// `D_o = sum_u sum_{i != j in u} (v_i - v_j)^2 / (m_u - 1) / n` and
/// `D_e = sum_{i != j} (v_i - v_j)^2 / (n (n - 1))` over all pairable values.
/// When every pairable value is the same, agreement is perfect and the result
/// is 1.
pub fn krippendorff_alpha_interval(ratings: &[RatingRecord]) -> Result<f64> {
    let mut items: BTreeMap<(&str, &SentenceRef), Vec<f64>> = BTreeMap::new();
    for r in ratings {
        items
            .entry((&r.query, &r.sentence))
            .or_default()
            .push(f64::from(r.score));
    }
    let units: Vec<Vec<f64>> = items.into_values().filter(|v| v.len() >= 2).collect();
    if units.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two items rated at least twice".into(),
        ));
    }
    let sq_pairs = |vals: &[f64]| -> f64 {
        // sum over ordered pairs i != j
        let mut s = 0.0;
        for (i, a) in vals.iter().enumerate() {
            for b in &vals[i + 1..] {
                s += 2.0 * (a - b) * (a - b);
            }
        }
        s
    };
    let n = units.iter().map(Vec::len).sum::<usize>() as f64;
    let d_o = units.iter().map(|u| sq_pairs(u) / (u.len() as f64 - 1.0)).sum::<f64>() / n;
    let pooled: Vec<f64> = units.concat();
    let d_e = sq_pairs(&pooled) / (n * (n - 1.0));
    if d_e == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}
