use std::collections::BTreeMap;

use super::{Aggregation, Normalization, PipelineError, RankedCandidate};
use crate::ScoreMatrix;

/// Per-query score normalization. Min-max maps onto [0, 1]; when every input
/// is equal all outputs are 1.0.
pub fn normalize_scores(
    raw: &BTreeMap<String, f64>,
    mode: Normalization,
) -> Result<BTreeMap<String, f64>, PipelineError> {
    if raw.is_empty() {
        return Err(PipelineError::Argument("cannot normalize an empty score map".into()));
    }
    let values: Vec<f64> = raw.values().copied().collect();
    let normalized = normalize_values(&values, mode)?;
    Ok(raw.keys().cloned().zip(normalized).collect())
}

pub(crate) fn normalize_values(values: &[f64], mode: Normalization) -> Result<Vec<f64>, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::Argument("cannot normalize an empty score list".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(PipelineError::Range {
            what: "raw score",
            value: *bad,
        });
    }
    Ok(match mode {
        Normalization::None => values.to_vec(),
        Normalization::MinmaxPerQuery => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = max - min;
            if span == 0.0 {
                vec![1.0; values.len()]
            } else {
                values.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect()
            }
        }
    })
}

fn check_unit(what: &'static str, value: f64) -> Result<(), PipelineError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PipelineError::Range { what, value })
    }
}

/// `alpha · supporting + (1 − alpha) · lexical`.
pub fn fuse(bm25_norm: f64, supporting: f64, alpha: f64) -> Result<f64, PipelineError> {
    check_unit("alpha", alpha)?;
    check_unit("lexical score", bm25_norm)?;
    check_unit("supporting score", supporting)?;
    Ok(alpha * supporting + (1.0 - alpha) * bm25_norm)
}

/// Collapses a paragraph-pair matrix to one document-level score.
pub fn aggregate_paragraph_scores(matrix: &ScoreMatrix, mode: Aggregation) -> Result<f64, PipelineError> {
    if matrix.is_empty() {
        return Err(PipelineError::Argument("cannot aggregate an empty matrix".into()));
    }
    match mode {
        Aggregation::Max => Ok(matrix.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        Aggregation::MeanTopM(m) => {
            if m == 0 {
                return Err(PipelineError::Argument("mean_top_m needs m >= 1".into()));
            }
            let mut vals = matrix.values().to_vec();
            vals.sort_by(|a, b| b.total_cmp(a));
            vals.truncate(m);
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Sorts by descending fused score, ties broken by ascending candidate id.
pub(crate) fn sort_ranked(ranked: &mut [RankedCandidate]) {
    ranked.sort_by(|a, b| {
        b.fused_score
            .total_cmp(&a.fused_score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
}

/// Sorts `(id, score)` by descending score then ascending id.
pub(crate) fn sort_scored(items: &mut [(String, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn minmax_basic_and_degenerate() {
        let n = normalize_scores(&map(&[("a", 2.0), ("b", 4.0)]), Normalization::MinmaxPerQuery).unwrap();
        assert_eq!(n, map(&[("a", 0.0), ("b", 1.0)]));
        let n = normalize_scores(&map(&[("a", 3.0), ("b", 3.0)]), Normalization::MinmaxPerQuery).unwrap();
        assert_eq!(n, map(&[("a", 1.0), ("b", 1.0)]));
        let raw = map(&[("a", 7.5), ("b", -1.0)]);
        assert_eq!(normalize_scores(&raw, Normalization::None).unwrap(), raw);
        assert!(normalize_scores(&BTreeMap::new(), Normalization::None).is_err());
    }

    #[test]
    fn fuse_endpoints_and_table_value() {
        assert_eq!(fuse(0.3, 0.9, 0.0).unwrap(), 0.3);
        assert_eq!(fuse(0.3, 0.9, 1.0).unwrap(), 0.9);
        assert!((fuse(1.0, 0.5, 0.85).unwrap() - 0.575).abs() < 1e-12);
        assert!(matches!(fuse(1.2, 0.5, 0.5), Err(PipelineError::Range { .. })));
        assert!(fuse(0.5, -0.1, 0.5).is_err());
        assert!(fuse(0.5, 0.5, 1.01).is_err());
    }

    #[test]
    fn aggregation_modes() {
        let m = ScoreMatrix::from_rows(vec![vec![0.2, 0.9], vec![0.1, 0.3]]).unwrap();
        assert_eq!(aggregate_paragraph_scores(&m, Aggregation::Max).unwrap(), 0.9);
        assert!((aggregate_paragraph_scores(&m, Aggregation::MeanTopM(2)).unwrap() - 0.6).abs() < 1e-12);
        assert!((aggregate_paragraph_scores(&m, Aggregation::MeanTopM(10)).unwrap() - 0.375).abs() < 1e-12);
        let one = ScoreMatrix::from_rows(vec![vec![0.4]]).unwrap();
        assert_eq!(aggregate_paragraph_scores(&one, Aggregation::Max).unwrap(), 0.4);
        assert_eq!(aggregate_paragraph_scores(&one, Aggregation::MeanTopM(3)).unwrap(), 0.4);
        assert!(aggregate_paragraph_scores(&ScoreMatrix::zeros(0, 0), Aggregation::Max).is_err());
    }
}
