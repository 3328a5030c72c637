//! Quarterly match counts.

use std::io::Write;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::RankedMatch;
use crate::corpus::Corpus;
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    /// First day of each calendar quarter, contiguous.
    pub bin_start: Vec<NaiveDate>,
    pub counts: Vec<u64>,
    /// Matches whose document has no date.
    pub undated_matches: u64,
}

/// First day of the calendar quarter containing `d`.
pub fn quarter_start(d: NaiveDate) -> NaiveDate {
    let month = (d.month0() / 3) * 3 + 1;
    NaiveDate::from_ymd_opt(d.year(), month, 1).expect("valid quarter start")
}

/// Bins matches by the publication date of their document. Matches whose
/// document is undated or unknown to `corpus` count as undated.
pub fn measure(matches: &[RankedMatch], corpus: &Corpus) -> MeasurementSeries {
    let mut undated = 0;
    let mut quarters: Vec<NaiveDate> = Vec::with_capacity(matches.len());
    for m in matches {
        match corpus.document(&m.sentence.doc).and_then(|d| d.date) {
            Some(date) => quarters.push(quarter_start(date)),
            None => undated += 1,
        }
    }
    let mut series = MeasurementSeries {
        undated_matches: undated,
        ..MeasurementSeries::default()
    };
    let (Some(&first), Some(&last)) = (quarters.iter().min(), quarters.iter().max()) else {
        return series;
    };
    let mut q = first;
    while q <= last {
        series.bin_start.push(q);
        q = q + Months::new(3);
    }
    series.counts = vec![0; series.bin_start.len()];
    for d in quarters {
        let i = series.bin_start.binary_search(&d).expect("quarter inside the range");
        series.counts[i] += 1;
    }
    series
}

impl MeasurementSeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.undated_matches
    }

    /// `quarter_start,count` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quarter_start", "count"])?;
        for (d, c) in self.bin_start.iter().zip(&self.counts) {
            w.write_record([d.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 csv")
    }
}
