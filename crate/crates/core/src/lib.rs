//! Two-stage legal retrieval and entailment.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: case documents, Civil Code articles and bar questions, their
//!   canonical JSONL formats, the plain-text Civil Code parser and corpus
//!   statistics.
//! - [`lexical`]: tokenization, the BM25 inverted index and the Tf-idf
//!   vectorizer used for candidate filtering.
//! - [`pairscore`]: weak-label pair extraction and text-pair scorers (a
//!   feature-hashed logistic model and a table of externally computed scores).
//! - [`pipelines`]: score normalization, linear fusion, paragraph aggregation,
//!   OR-ensembling and the case/statute retrieval pipelines.
//! - [`entail`]: yes/no answering over bar questions.
//! - [`eval`]: set and ranking metrics plus report rendering.

pub mod corpus;
pub mod entail;
pub mod eval;
pub mod lexical;
pub mod matrix;
pub mod pairscore;
pub mod pipelines;

mod binfmt;

pub use binfmt::FormatError;
pub use matrix::ScoreMatrix;

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `bytes`. Used for corpus and config fingerprints.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
