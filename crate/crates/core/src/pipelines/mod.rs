//! Retrieve-then-rerank pipelines.
//!
//! Every pipeline follows the same shape: a lexical stage ranks candidates
//! and keeps the best `top_n`, a supporting scorer rates each survivor, the
//! lexical score is normalized per query and the two are mixed as
//! `alpha · supporting + (1 − alpha) · lexical`. A selection rule then picks
//! the returned set.
//!
//! Per-query work is independent. Batch helpers run queries on the rayon
//! pool and return results in input order.

mod fusion;
mod task1;
mod task2;
mod task3;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::LexicalError;

pub use fusion::{aggregate_paragraph_scores, fuse, normalize_scores};
pub use task1::{bm25_prefilter, run_task1, run_task1_batch};
pub use task2::{run_task2, LexicalSource};
pub use task3::{ensemble_or, run_task3, sweep_k, ArticleRetriever, SweepReport, Task3Prediction};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{what} {value} outside [0, 1]")]
    Range { what: &'static str, value: f64 },
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error("query {query_id:?}: {source}")]
    Query {
        query_id: String,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    pub(crate) fn in_query(self, query_id: &str) -> Self {
        match self {
            e @ PipelineError::Query { .. } => e,
            other => PipelineError::Query {
                query_id: query_id.to_string(),
                source: Box::new(other),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    MinmaxPerQuery,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    /// Keep candidates whose fused score is at least the threshold.
    Threshold(f64),
    /// Keep the best `m` candidates.
    FixedK(usize),
}

/// How a paragraph-pair matrix becomes one document score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    Max,
    MeanTopM(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub alpha: f64,
    pub top_n: usize,
    pub normalization: Normalization,
    pub selection: Selection,
    pub aggregation: Aggregation,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            top_n: 25,
            normalization: Normalization::MinmaxPerQuery,
            selection: Selection::Threshold(0.5),
            aggregation: Aggregation::Max,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PipelineError::Range {
                what: "alpha",
                value: self.alpha,
            });
        }
        if self.top_n < 1 {
            return Err(PipelineError::Argument("top_n must be at least 1".into()));
        }
        match self.selection {
            Selection::Threshold(t) if !t.is_finite() => {
                return Err(PipelineError::Argument("selection threshold must be finite".into()))
            }
            Selection::FixedK(0) => return Err(PipelineError::Argument("fixed_k needs m >= 1".into())),
            _ => {}
        }
        if self.aggregation == Aggregation::MeanTopM(0) {
            return Err(PipelineError::Argument("mean_top_m needs m >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate_id: String,
    pub fused_score: f64,
    /// Normalized lexical score that entered the fusion.
    pub bm25_component: f64,
    pub supporting_component: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    /// Candidates that survived the lexical filter, fused and sorted.
    pub ranked: Vec<RankedCandidate>,
    pub selected: BTreeSet<String>,
    /// Candidates whose score came from a scorer default instead of a real entry.
    pub warnings: usize,
}

impl RetrievalResult {
    pub fn ranked_ids(&self) -> Vec<&str> {
        self.ranked.iter().map(|r| r.candidate_id.as_str()).collect()
    }
}

/// Normalizes the lexical scores of the survivors, fuses, sorts and selects.
pub(crate) fn fuse_and_select(
    query_id: &str,
    survivors: &[(String, f64)],
    supporting: &[f64],
    fusion: &FusionConfig,
    warnings: usize,
) -> Result<RetrievalResult, PipelineError> {
    debug_assert_eq!(survivors.len(), supporting.len());
    let raw: Vec<f64> = survivors.iter().map(|s| s.1).collect();
    let lexical = fusion::normalize_values(&raw, fusion.normalization)?;
    let mut ranked = Vec::with_capacity(survivors.len());
    for (((id, _), &lex), &sup) in survivors.iter().zip(&lexical).zip(supporting) {
        ranked.push(RankedCandidate {
            candidate_id: id.clone(),
            fused_score: fuse(lex, sup, fusion.alpha)?,
            bm25_component: lex,
            supporting_component: sup,
        });
    }
    fusion::sort_ranked(&mut ranked);
    let selected = match fusion.selection {
        Selection::Threshold(t) => ranked
            .iter()
            .filter(|r| r.fused_score >= t)
            .map(|r| r.candidate_id.clone())
            .collect(),
        Selection::FixedK(m) => ranked.iter().take(m).map(|r| r.candidate_id.clone()).collect(),
    };
    Ok(RetrievalResult {
        query_id: query_id.to_string(),
        ranked,
        selected,
        warnings,
    })
}
