//! Proposition matching over news corpora.
//!
//! A query sentence is compared against every corpus sentence with a cheap
//! word-vector or tf-idf filter; the survivors are reranked by an entailment
//! model over a tree-edit script from the candidate's parse to the query's.
//! Matches can be binned by publication quarter, and the rankers evaluated
//! with recall/precision at n and rating agreement.

pub mod corpus;
pub mod embedding;
mod error;
pub mod filter;
pub mod models;
pub mod pipeline;
pub mod tree_edit;

pub use error::{Error, Result};
