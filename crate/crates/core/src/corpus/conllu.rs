//! CoNLL-U reading and writing.
//!
//! Only the columns the matcher needs are interpreted: ID, FORM, LEMMA,
//! UPOS (XPOS when UPOS is `_`), HEAD and DEPREL. Multiword-token ranges
//! (`3-4`) and empty nodes (`5.1`) are skipped.

use std::fmt::Write as _;
use std::io::BufRead;

use super::{DepTree, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ParsedSentence {
    /// Value of the `# sent_id = ...` comment, if present.
    pub sent_id: Option<String>,
    pub tokens: Vec<Token>,
    pub tree: DepTree,
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedParse {
        line,
        reason: reason.into(),
    }
}

struct Block {
    start: usize,
    sent_id: Option<String>,
    tokens: Vec<Token>,
}

impl Block {
    fn finish(self) -> Result<ParsedSentence> {
        let start = self.start;
        let tree = DepTree::from_tokens(&self.tokens).map_err(|e| match e {
            Error::MalformedParse { reason, .. } => malformed(start, reason),
            other => other,
        })?;
        Ok(ParsedSentence {
            sent_id: self.sent_id,
            tokens: self.tokens,
            tree,
        })
    }
}

fn parse_token_line(line: &str, lineno: usize) -> Result<Option<Token>> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(malformed(lineno, format!("expected 10 columns, found {}", cols.len())));
    }
    if cols[0].contains('-') || cols[0].contains('.') {
        return Ok(None);
    }
    let index: usize = cols[0]
        .parse()
        .map_err(|_| malformed(lineno, format!("non-integer token id `{}`", cols[0])))?;
    if index == 0 {
        return Err(malformed(lineno, "token id 0"));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(lineno, format!("non-integer head `{}`", cols[6])))?;
    let form = cols[1].to_string();
    let lemma = if cols[2] == "_" {
        form.clone()
    } else {
        cols[2].to_string()
    };
    let pos = if cols[3] == "_" { cols[4] } else { cols[3] }.to_string();
    Ok(Some(Token {
        index,
        form,
        lemma,
        pos,
        head: Some(head),
        deprel: Some(cols[7].to_string()),
    }))
}

/// Parses every sentence block of a CoNLL-U stream into tokens and a tree.
pub fn parse_conllu<R: BufRead>(input: R) -> Result<Vec<ParsedSentence>> {
    let mut out = Vec::new();
    let mut block: Option<Block> = None;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                if !b.tokens.is_empty() {
                    out.push(b.finish()?);
                }
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Block {
            start: lineno,
            sent_id: None,
            tokens: Vec::new(),
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    b.sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if let Some(tok) = parse_token_line(line, lineno)? {
            b.tokens.push(tok);
        }
    }
    if let Some(b) = block.take() {
        if !b.tokens.is_empty() {
            out.push(b.finish()?);
        }
    }
    Ok(out)
}

/// Writes sentences as CoNLL-U, one block per sentence, each followed by a blank line.
pub fn serialize_conllu<'a, I>(sentences: I) -> String
where
    I: IntoIterator<Item = (Option<&'a str>, &'a [Token])>,
{
    let mut out = String::new();
    for (sent_id, tokens) in sentences {
        if let Some(id) = sent_id {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        for t in tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index,
                t.form,
                t.lemma,
                t.pos,
                t.head.unwrap_or(0),
                t.deprel.as_deref().unwrap_or("dep"),
            );
        }
        out.push('\n');
    }
    out
}
