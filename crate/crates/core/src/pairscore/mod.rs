//! Supporting scores for text pairs.
//!
//! [`PairScorer`] is the seam between the retrieval pipelines and whatever
//! judges "does the right text support the left one". Two implementations
//! ship here: [`LinearPairScorer`], a feature-hashed logistic model trained
//! with SGD on weakly labeled pairs, and [`ExternalScoreTable`], which serves
//! scores computed elsewhere.

mod external;
mod features;
mod linear;
mod weak;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ScoreMatrix;

pub use external::{load_external_scores, ExternalScoreTable};
pub use features::{FeatureHasher, PairFeatures, DEFAULT_DIM};
pub use linear::{
    examples_from_pairs, objective, objective_gradient, sigmoid, train, train_with_history, LinearPairScorer,
    TrainParams, TrainingExample,
};
pub use weak::{extract_weak_pairs, strip_ordinal, WeakLabelConfig};

#[derive(Debug, Error)]
pub enum PairScoreError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("score {value} outside [0, 1]{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Range { line: Option<usize>, value: f64 },
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl PairScoreError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Positive,
    Negative,
}

/// Left text (decision, fragment or question) and right text (candidate
/// paragraph or article).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub left: String,
    pub right: String,
    #[serde(default)]
    pub label: Option<PairLabel>,
}

impl TextPair {
    pub fn new(left: impl Into<String>, right: impl Into<String>, label: Option<PairLabel>) -> Result<Self, PairScoreError> {
        let (left, right) = (left.into(), right.into());
        if left.trim().is_empty() || right.trim().is_empty() {
            return Err(PairScoreError::InvalidPair("both sides of a pair must be non-empty".into()));
        }
        Ok(Self { left, right, label })
    }

    /// A single-text sample with an empty right side, for text classification.
    pub fn unary(text: impl Into<String>, label: Option<PairLabel>) -> Result<Self, PairScoreError> {
        let left = text.into();
        if left.trim().is_empty() {
            return Err(PairScoreError::InvalidPair("text must be non-empty".into()));
        }
        Ok(Self {
            left,
            right: String::new(),
            label,
        })
    }
}

/// What a scorer sees: the ids of both sides plus their texts. Id-keyed
/// scorers ignore the texts and text scorers ignore the ids.
#[derive(Debug, Clone, Copy)]
pub struct PairRef<'a> {
    pub query_id: &'a str,
    pub candidate_id: &'a str,
    pub left: &'a str,
    pub right: &'a str,
}

impl<'a> PairRef<'a> {
    pub fn texts(left: &'a str, right: &'a str) -> Self {
        Self {
            query_id: "",
            candidate_id: "",
            left,
            right,
        }
    }

    pub fn ids(query_id: &'a str, candidate_id: &'a str) -> Self {
        Self {
            query_id,
            candidate_id,
            left: "",
            right: "",
        }
    }
}

/// A text-pair relevance scorer producing values in [0, 1].
pub trait PairScorer: Send + Sync {
    fn score(&self, pair: &PairRef<'_>) -> f64;

    /// Whether the scorer has a real opinion about `pair`, as opposed to
    /// falling back to a default.
    fn covers(&self, _pair: &PairRef<'_>) -> bool {
        true
    }

    /// Scores every `(left[i], right[j])` pair and reports whether all of
    /// them were covered.
    fn score_block(&self, query_id: &str, candidate_id: &str, left: &[&str], right: &[&str]) -> (ScoreMatrix, bool) {
        let mut covered = true;
        let m = ScoreMatrix::from_fn(left.len(), right.len(), |i, j| {
            let pair = PairRef {
                query_id,
                candidate_id,
                left: left[i],
                right: right[j],
            };
            covered &= self.covers(&pair);
            self.score(&pair)
        });
        (m, covered)
    }
}

impl<T: PairScorer + ?Sized> PairScorer for &T {
    fn score(&self, pair: &PairRef<'_>) -> f64 {
        (**self).score(pair)
    }

    fn covers(&self, pair: &PairRef<'_>) -> bool {
        (**self).covers(pair)
    }

    fn score_block(&self, query_id: &str, candidate_id: &str, left: &[&str], right: &[&str]) -> (ScoreMatrix, bool) {
        (**self).score_block(query_id, candidate_id, left, right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sides_must_be_non_empty() {
        assert!(TextPair::new("", "x", None).is_err());
        assert!(TextPair::new("x", "  ", None).is_err());
        assert!(TextPair::unary("x", None).is_ok());
        assert!(TextPair::unary("", None).is_err());
    }

    #[test]
    fn zero_weight_scorer_is_half() {
        let m = LinearPairScorer::untrained(3, 1 << 8).unwrap();
        assert_eq!(m.score(&PairRef::texts("a b", "c d")), 0.5);
    }

    #[test]
    fn labels_serialize_lowercase() {
        let p = TextPair::new("a", "b", Some(PairLabel::Negative)).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"left":"a","right":"b","label":"negative"}"#);
    }
}
