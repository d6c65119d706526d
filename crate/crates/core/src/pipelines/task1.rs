use rayon::prelude::*;

use super::fusion::{aggregate_paragraph_scores, sort_scored};
use super::{fuse_and_select, FusionConfig, PipelineError, RetrievalResult};
use crate::corpus::CaseDocument;
use crate::lexical::{bm25_pair_matrix, Bm25Params, TokenizerConfig};
use crate::pairscore::PairScorer;

/// Stage 1: aggregated paragraph-level BM25 for every candidate, sorted
/// descending (ties by id) and cut to `fusion.top_n`.
pub fn bm25_prefilter(
    base: &CaseDocument,
    candidates: &[&CaseDocument],
    params: &Bm25Params,
    tokenizer: &TokenizerConfig,
    fusion: &FusionConfig,
) -> Result<Vec<(String, f64)>, PipelineError> {
    let query_paragraphs = base.paragraph_texts();
    let mut scored = candidates
        .iter()
        .map(|cand| {
            let m = bm25_pair_matrix(&query_paragraphs, &cand.paragraph_texts(), params, tokenizer)?;
            Ok((cand.id.clone(), aggregate_paragraph_scores(&m, fusion.aggregation)?))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    sort_scored(&mut scored);
    scored.truncate(fusion.top_n);
    Ok(scored)
}

fn supporting_score(
    scorer: &dyn PairScorer,
    base: &CaseDocument,
    cand: &CaseDocument,
    fusion: &FusionConfig,
) -> Result<(f64, bool), PipelineError> {
    let (m, covered) = scorer.score_block(&base.id, &cand.id, &base.paragraph_texts(), &cand.paragraph_texts());
    Ok((aggregate_paragraph_scores(&m, fusion.aggregation)?, covered))
}

/// Case retrieval for one base case.
///
/// Stage 2 scores every (base paragraph, candidate paragraph) pair of each
/// surviving candidate with `scorer` and aggregates them like stage 1.
pub fn run_task1(
    base: &CaseDocument,
    candidates: &[&CaseDocument],
    scorer: &dyn PairScorer,
    bm25: &Bm25Params,
    tokenizer: &TokenizerConfig,
    fusion: &FusionConfig,
) -> Result<RetrievalResult, PipelineError> {
    let run = || {
        fusion.validate()?;
        if candidates.is_empty() {
            return Err(PipelineError::Argument("no candidate cases".into()));
        }
        let survivors = bm25_prefilter(base, candidates, bm25, tokenizer, fusion)?;
        let by_id = |id: &str| candidates.iter().find(|c| c.id == id).copied();
        let supporting = survivors
            .par_iter()
            .map(|(id, _)| {
                let cand = by_id(id).ok_or_else(|| PipelineError::State(format!("lost candidate {id:?}")))?;
                supporting_score(scorer, base, cand, fusion)
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let warnings = supporting.iter().filter(|(_, covered)| !covered).count();
        let sup: Vec<f64> = supporting.into_iter().map(|(s, _)| s).collect();
        fuse_and_select(&base.id, &survivors, &sup, fusion, warnings)
    };
    run().map_err(|e| e.in_query(&base.id))
}

/// Runs [`run_task1`] for many `(base, candidates)` queries concurrently,
/// returning results in input order.
pub fn run_task1_batch(
    queries: &[(&CaseDocument, Vec<&CaseDocument>)],
    scorer: &dyn PairScorer,
    bm25: &Bm25Params,
    tokenizer: &TokenizerConfig,
    fusion: &FusionConfig,
) -> Result<Vec<RetrievalResult>, PipelineError> {
    queries
        .par_iter()
        .map(|(base, cands)| run_task1(base, cands, scorer, bm25, tokenizer, fusion))
        .collect()
}
