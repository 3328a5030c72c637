//! Documents, sentences, tokens and dependency trees.

mod conllu;
mod ingest;
mod sym;
mod tokenize;
mod tree;

use std::collections::HashMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use conllu::{parse_conllu, serialize_conllu, ParsedSentence};
pub use ingest::{ingest_corpus, ingest_records, DocumentRecord};
pub use sym::Sym;
pub use tokenize::fallback_tokenize;
pub use tree::{trees_equal, Children, DepTree, Node, NodeId, NodeLabel, Side};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    /// Index of the governor, 0 for the root. `None` for unparsed tokens.
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

/// Stable address of a sentence: owning document id plus position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc: String,
    pub position: usize,
}

impl SentenceRef {
    pub fn new(doc: impl Into<String>, position: usize) -> Self {
        SentenceRef {
            doc: doc.into(),
            position,
        }
    }

    /// Parses the `docid:position` key used in CoNLL-U `sent_id` comments.
    /// Document ids may themselves contain colons; the last one separates the position.
    pub fn parse_key(key: &str) -> Option<Self> {
        let (doc, pos) = key.rsplit_once(':')?;
        Some(SentenceRef::new(doc, pos.trim().parse().ok()?))
    }
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.doc, self.position)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub tree: Option<DepTree>,
    pub position: usize,
}

impl Sentence {
    /// An unparsed sentence tokenized with [`fallback_tokenize`].
    pub fn from_text(id: impl Into<String>, position: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        Sentence {
            id: id.into(),
            tokens: fallback_tokenize(&text),
            text,
            tree: None,
            position,
        }
    }

    /// Replaces the tokens with parsed ones and attaches the tree.
    pub fn attach_parse(&mut self, tokens: Vec<Token>, tree: DepTree) {
        self.tokens = tokens;
        self.tree = Some(tree);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub date: Option<NaiveDate>,
    pub source: Option<String>,
    pub sentences: Vec<Sentence>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CorpusRepr", into = "CorpusRepr")]
pub struct Corpus {
    documents: Vec<Document>,
    sentence_index: Vec<SentenceRef>,
    // (document index, position) for each entry of `sentence_index`
    locations: Vec<(usize, usize)>,
    doc_lookup: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRepr {
    documents: Vec<Document>,
}

impl TryFrom<CorpusRepr> for Corpus {
    type Error = Error;
    fn try_from(r: CorpusRepr) -> Result<Self> {
        Corpus::new(r.documents)
    }
}

impl From<Corpus> for CorpusRepr {
    fn from(c: Corpus) -> Self {
        CorpusRepr { documents: c.documents }
    }
}

impl Corpus {
    /// Builds the global sentence index. Sentence positions are renumbered to
    /// be contiguous within each document.
    pub fn new(mut documents: Vec<Document>) -> Result<Self> {
        let mut doc_lookup = HashMap::with_capacity(documents.len());
        let mut sentence_index = Vec::new();
        let mut locations = Vec::new();
        for (d, doc) in documents.iter_mut().enumerate() {
            if doc_lookup.insert(doc.id.clone(), d).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            for (p, s) in doc.sentences.iter_mut().enumerate() {
                s.position = p;
                sentence_index.push(SentenceRef::new(doc.id.clone(), p));
                locations.push((d, p));
            }
        }
        Ok(Corpus {
            documents,
            sentence_index,
            locations,
            doc_lookup,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_lookup.get(id).map(|&d| &self.documents[d])
    }

    pub fn sentence_index(&self) -> &[SentenceRef] {
        &self.sentence_index
    }

    /// Number of sentences.
    pub fn len(&self) -> usize {
        self.sentence_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_index.is_empty()
    }

    pub fn sentence(&self, r: &SentenceRef) -> Option<&Sentence> {
        self.document(&r.doc)?.sentences.get(r.position)
    }

    /// Sentence at a global (corpus order) index.
    pub fn sentence_at(&self, i: usize) -> Option<(&SentenceRef, &Sentence)> {
        let (d, p) = *self.locations.get(i)?;
        Some((&self.sentence_index[i], &self.documents[d].sentences[p]))
    }

    /// All sentences in corpus order.
    pub fn sentences(&self) -> impl ExactSizeIterator<Item = (&SentenceRef, &Sentence)> + '_ {
        self.locations
            .iter()
            .zip(&self.sentence_index)
            .map(|(&(d, p), r)| (r, &self.documents[d].sentences[p]))
    }

    /// Global corpus-order index of a sentence.
    pub fn global_index(&self, r: &SentenceRef) -> Option<usize> {
        let d = *self.doc_lookup.get(&r.doc)?;
        let before: usize = self.documents[..d].iter().map(|x| x.sentences.len()).sum();
        (r.position < self.documents[d].sentences.len()).then_some(before + r.position)
    }

    /// The sentences immediately before and after `r` in its document.
    pub fn context(&self, r: &SentenceRef) -> (Option<&Sentence>, Option<&Sentence>) {
        let Some(doc) = self.document(&r.doc) else {
            return (None, None);
        };
        let before = r.position.checked_sub(1).and_then(|p| doc.sentences.get(p));
        let after = doc.sentences.get(r.position + 1);
        (before, after)
    }
}
