//! Tokenization, BM25 over an inverted index, and Tf-idf cosine ranking.
//!
//! Both scoring structures are immutable once built and can be shared across
//! threads for concurrent scoring.

mod bm25;
mod tfidf;
mod tokenize;

use std::io::{Read, Write};

use thiserror::Error;

use crate::binfmt::{self, FormatError};

pub use bm25::{bm25_pair_matrix, bm25_score, Bm25Params, InvertedIndex, Posting};
pub use tfidf::{cosine_rank_topk, cosine_similarity, RankedUnit, SparseVector, TfidfCorpus, TfidfModel};
pub use tokenize::{english_stopwords, tokenize, TokenizerConfig};

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duplicate unit id {0:?}")]
    DuplicateUnit(String),
    #[error("unknown unit id {0:?}")]
    UnknownUnit(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub(crate) fn write_tokenizer_config<W: Write>(w: &mut W, cfg: &TokenizerConfig) -> Result<(), FormatError> {
    binfmt::write_u8(w, cfg.lowercase as u8)?;
    binfmt::write_u32(w, binfmt::len_u32(cfg.min_token_len)?)?;
    match &cfg.stopwords {
        None => binfmt::write_u8(w, 0)?,
        Some(words) => {
            binfmt::write_u8(w, 1)?;
            binfmt::write_u32(w, binfmt::len_u32(words.len())?)?;
            for word in words {
                binfmt::write_str(w, word)?;
            }
        }
    }
    Ok(())
}

pub(crate) fn read_tokenizer_config<R: Read>(r: &mut R) -> Result<TokenizerConfig, FormatError> {
    let lowercase = match binfmt::read_u8(r)? {
        0 => false,
        1 => true,
        other => return Err(FormatError::Invalid(format!("bad lowercase flag {other}"))),
    };
    let min_token_len = binfmt::read_u32(r)? as usize;
    if min_token_len < 1 {
        return Err(FormatError::Invalid("min_token_len must be at least 1".into()));
    }
    let stopwords = match binfmt::read_u8(r)? {
        0 => None,
        1 => {
            let n = binfmt::read_u32(r)?;
            let mut set = std::collections::BTreeSet::new();
            for _ in 0..n {
                set.insert(binfmt::read_str(r)?);
            }
            Some(set)
        }
        other => return Err(FormatError::Invalid(format!("bad stopword flag {other}"))),
    };
    Ok(TokenizerConfig {
        lowercase,
        stopwords,
        min_token_len,
    })
}
