use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BarQuestion, CaseDocument, CaseQuery, CorpusError, StatuteArticle};
use crate::lexical::{tokenize, TokenizerConfig};

/// Anything with paragraphs that can be counted.
pub trait StatsUnit {
    fn unit_paragraphs(&self) -> Vec<&str>;
}

impl StatsUnit for CaseDocument {
    fn unit_paragraphs(&self) -> Vec<&str> {
        self.paragraph_texts()
    }
}

impl StatsUnit for StatuteArticle {
    fn unit_paragraphs(&self) -> Vec<&str> {
        vec![self.content.as_str()]
    }
}

impl StatsUnit for BarQuestion {
    fn unit_paragraphs(&self) -> Vec<&str> {
        vec![self.content.as_str()]
    }
}

/// A query that may carry a candidate pool and gold labels.
pub trait LabeledQuery {
    fn candidate_count(&self) -> usize;
    /// `None` for unlabeled queries.
    fn gold_count(&self) -> Option<usize>;
}

impl LabeledQuery for CaseQuery {
    fn candidate_count(&self) -> usize {
        self.candidates.len()
    }
    fn gold_count(&self) -> Option<usize> {
        Some(self.gold.len())
    }
}

impl LabeledQuery for BarQuestion {
    fn candidate_count(&self) -> usize {
        0
    }
    fn gold_count(&self) -> Option<usize> {
        (!self.relevant_article_ids.is_empty()).then_some(self.relevant_article_ids.len())
    }
}

#[derive(Debug, Clone)]
pub struct StatsConfig {
    pub bucket_width: usize,
    pub tokenizer: TokenizerConfig,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            bucket_width: 100,
            tokenizer: TokenizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mean_words_per_doc: f64,
    pub mean_paragraphs_per_doc: f64,
    pub max_words: usize,
    pub max_paragraphs: usize,
    pub sample_count: usize,
    pub candidate_count: usize,
    pub mean_gold_per_query: Option<f64>,
    /// Bucket lower bound (in tokens) → number of documents.
    pub length_histogram: BTreeMap<usize, usize>,
}

/// Length and label statistics over `docs` and optional `queries`.
pub fn compute_corpus_stats<D, Q>(
    docs: &[D],
    queries: Option<&[Q]>,
    config: &StatsConfig,
) -> Result<CorpusStats, CorpusError>
where
    D: StatsUnit,
    Q: LabeledQuery,
{
    if docs.is_empty() {
        return Err(CorpusError::Argument("corpus statistics need at least one document".into()));
    }
    if config.bucket_width == 0 {
        return Err(CorpusError::Argument("histogram bucket width must be positive".into()));
    }
    let mut total_words = 0usize;
    let mut total_paragraphs = 0usize;
    let mut max_words = 0usize;
    let mut max_paragraphs = 0usize;
    let mut histogram = BTreeMap::new();
    for doc in docs {
        let paragraphs = doc.unit_paragraphs();
        let words: usize = paragraphs.iter().map(|p| tokenize(p, &config.tokenizer).len()).sum();
        total_words += words;
        total_paragraphs += paragraphs.len();
        max_words = max_words.max(words);
        max_paragraphs = max_paragraphs.max(paragraphs.len());
        *histogram.entry(words / config.bucket_width * config.bucket_width).or_insert(0) += 1;
    }
    let n = docs.len() as f64;

    let (candidate_count, mean_gold_per_query) = match queries {
        None => (0, None),
        Some(qs) => {
            let candidates = qs.iter().map(LabeledQuery::candidate_count).sum();
            let golds: Vec<usize> = qs.iter().filter_map(LabeledQuery::gold_count).collect();
            let mean = (!golds.is_empty()).then(|| golds.iter().sum::<usize>() as f64 / golds.len() as f64);
            (candidates, mean)
        }
    };

    Ok(CorpusStats {
        mean_words_per_doc: total_words as f64 / n,
        mean_paragraphs_per_doc: total_paragraphs as f64 / n,
        max_words,
        max_paragraphs,
        sample_count: docs.len(),
        candidate_count,
        mean_gold_per_query,
        length_histogram: histogram,
    })
}
