use std::collections::HashMap;
use std::io::BufRead;

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Pre-trained word vectors, stored row-major in a single buffer.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    rows: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs. The first occurrence of a word wins.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::BadVectorFile {
                line: 0,
                reason: "dimension must be positive".into(),
            });
        }
        let mut table = EmbeddingTable {
            dim,
            rows: HashMap::new(),
            data: Vec::new(),
        };
        for (i, (word, v)) in entries.into_iter().enumerate() {
            table.push(word.into(), &v, i + 1)?;
        }
        Ok(table)
    }

    fn push(&mut self, word: String, v: &[f32], line: usize) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::BadVectorFile {
                line,
                reason: format!("expected {} components, found {}", self.dim, v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadVectorFile {
                line,
                reason: format!("non-finite component in vector for `{word}`"),
            });
        }
        if !self.rows.contains_key(&word) {
            self.rows.insert(word, self.data.len() / self.dim);
            self.data.extend_from_slice(v);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact lookup.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        let row = *self.rows.get(word)?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Exact lookup, then the lowercased word.
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.get(word).or_else(|| {
            let lower = word.to_lowercase();
            if lower == word {
                None
            } else {
                self.get(&lower)
            }
        })
    }

    /// Mean of the vectors of in-vocabulary token forms; zero if none are known.
    pub fn avg_vector(&self, tokens: &[Token]) -> Vec<f64> {
        self.average(tokens.iter().map(|t| t.form.as_str()))
    }

    pub fn average<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut sum = vec![0.0f64; self.dim];
        let mut n = 0usize;
        for w in words {
            if let Some(v) = self.lookup(w) {
                for (s, &x) in sum.iter_mut().zip(v) {
                    *s += f64::from(x);
                }
                n += 1;
            }
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            sum.iter_mut().for_each(|s| *s *= inv);
        }
        sum
    }

    /// Vector for `word` widened to `f64`, or zeros when out of vocabulary.
    pub fn vector_or_zero(&self, word: &str) -> Vec<f64> {
        match self.lookup(word) {
            Some(v) => v.iter().map(|&x| f64::from(x)).collect(),
            None => vec![0.0; self.dim],
        }
    }
}

/// Reads a whitespace-separated text vector file (`word v1 .. vd` per line).
///
/// A leading `count dim` header line is skipped. The dimension is taken from
/// the first vector line.
pub fn load_embeddings<R: BufRead>(input: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if lineno == 1 && rest.len() == 1 && word.parse::<u64>().is_ok() && rest[0].parse::<u64>().is_ok() {
            continue;
        }
        let v = rest
            .iter()
            .map(|s| s.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::BadVectorFile {
                line: lineno,
                reason: format!("unparseable component: {e}"),
            })?;
        let t = match table.as_mut() {
            Some(t) => t,
            None => {
                if v.is_empty() {
                    return Err(Error::BadVectorFile {
                        line: lineno,
                        reason: "vector line has no components".into(),
                    });
                }
                table.insert(EmbeddingTable {
                    dim: v.len(),
                    rows: HashMap::new(),
                    data: Vec::new(),
                })
            }
        };
        t.push(word.to_string(), &v, lineno)?;
    }
    table.ok_or_else(|| Error::BadVectorFile {
        line: 0,
        reason: "no vectors".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fallback_tokenize;

    const THREE: &str = "a 1 0 0 0\nb 0 1 0 0\nc 0 0 1 0\n";

    #[test]
    fn loads_with_and_without_header() {
        let t = load_embeddings(THREE.as_bytes()).unwrap();
        assert_eq!((t.dim(), t.len()), (4, 3));
        let h = load_embeddings(format!("3 4\n{THREE}").as_bytes()).unwrap();
        assert_eq!((h.dim(), h.len()), (4, 3));
        for w in ["a", "b", "c"] {
            assert_eq!(t.get(w), h.get(w));
        }
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        let ragged = format!("{THREE}d 1 2 3\n");
        assert!(matches!(
            load_embeddings(ragged.as_bytes()),
            Err(Error::BadVectorFile { line: 4, .. })
        ));
        assert!(matches!(
            load_embeddings("a 1 x\n".as_bytes()),
            Err(Error::BadVectorFile { .. })
        ));
        assert!(matches!(
            load_embeddings("a 1 NaN\n".as_bytes()),
            Err(Error::BadVectorFile { .. })
        ));
    }

    #[test]
    fn duplicate_words_keep_first() {
        let t = load_embeddings("a 1 2\na 3 4\n".as_bytes()).unwrap();
        assert_eq!(t.get("a"), Some(&[1.0f32, 2.0][..]));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn averaging() {
        let t = EmbeddingTable::from_entries(2, [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        assert_eq!(t.avg_vector(&fallback_tokenize("a b")), vec![0.5, 0.5]);
        assert_eq!(t.avg_vector(&fallback_tokenize("zz qq")), vec![0.0, 0.0]);
        assert_eq!(t.avg_vector(&fallback_tokenize("b")), vec![0.0, 1.0]);
        // lowercase fallback and OOV skipping
        assert_eq!(t.avg_vector(&fallback_tokenize("A xx")), vec![1.0, 0.0]);
    }

    #[test]
    fn exact_match_beats_lowercase() {
        let t = EmbeddingTable::from_entries(1, [("Cera", vec![2.0]), ("cera", vec![-1.0])]).unwrap();
        assert_eq!(t.lookup("Cera"), Some(&[2.0f32][..]));
        assert_eq!(t.lookup("CERA"), Some(&[-1.0f32][..]));
    }
}
