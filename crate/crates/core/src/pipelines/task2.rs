use super::fusion::sort_scored;
use super::{fuse_and_select, FusionConfig, PipelineError, RetrievalResult};
use crate::lexical::{tokenize, Bm25Params, InvertedIndex, TokenizerConfig};
use crate::pairscore::{ExternalScoreTable, PairRef, PairScorer};

/// The lexical slot of the paragraph pipeline: BM25 over the candidate
/// paragraphs, or a table of external scores keyed by
/// `(query_id, candidate_id)`. External tables can only occupy this slot.
#[derive(Debug, Clone)]
pub enum LexicalSource<'a> {
    Bm25 {
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    },
    External(&'a ExternalScoreTable),
}

/// Finds the paragraphs that support `fragment` among `candidates`
/// (`(paragraph id, text)` pairs).
pub fn run_task2<K, T>(
    query_id: &str,
    fragment: &str,
    candidates: &[(K, T)],
    scorer: &dyn PairScorer,
    lexical: &LexicalSource<'_>,
    fusion: &FusionConfig,
) -> Result<RetrievalResult, PipelineError>
where
    K: AsRef<str>,
    T: AsRef<str>,
{
    let run = || {
        fusion.validate()?;
        if candidates.is_empty() {
            return Err(PipelineError::Argument("no candidate paragraphs".into()));
        }
        let mut warnings = 0;
        let mut scored: Vec<(String, f64)> = match lexical {
            LexicalSource::Bm25 { params, tokenizer } => {
                params.validate()?;
                let index = InvertedIndex::build(candidates.iter().map(|(k, t)| (k.as_ref(), t.as_ref())), tokenizer)?;
                let q = tokenize(fragment, tokenizer);
                index.unit_ids().iter().cloned().zip(index.score_all(params, &q)).collect()
            }
            LexicalSource::External(table) => candidates
                .iter()
                .map(|(k, _)| {
                    let pair = PairRef::ids(query_id, k.as_ref());
                    if !table.covers(&pair) {
                        warnings += 1;
                    }
                    (k.as_ref().to_string(), table.score(&pair))
                })
                .collect(),
        };
        sort_scored(&mut scored);
        scored.truncate(fusion.top_n);

        let text_of = |id: &str| candidates.iter().find(|(k, _)| k.as_ref() == id).map(|(_, t)| t.as_ref());
        let mut supporting = Vec::with_capacity(scored.len());
        for (id, _) in &scored {
            let text = text_of(id).ok_or_else(|| PipelineError::State(format!("lost candidate {id:?}")))?;
            let pair = PairRef {
                query_id,
                candidate_id: id,
                left: fragment,
                right: text,
            };
            if !scorer.covers(&pair) {
                warnings += 1;
            }
            supporting.push(scorer.score(&pair));
        }
        fuse_and_select(query_id, &scored, &supporting, fusion, warnings)
    };
    run().map_err(|e| e.in_query(query_id))
}
