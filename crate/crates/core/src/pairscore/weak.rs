//! Weak supervision for supporting-pair classification.
//!
//! A sentence that opens with a conclusion marker ("Therefore", ...) is taken
//! to be supported by the paragraph right before it. Negatives pair the same
//! sentence with paragraphs at least `min_negative_distance` away from that
//! supporting paragraph.

use std::sync::OnceLock;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::features::stable_hash;
use super::{PairLabel, PairScoreError, TextPair};
use crate::corpus::CaseDocument;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelConfig {
    pub marker_list: Vec<String>,
    pub negatives_per_positive: usize,
    pub min_negative_distance: usize,
    pub seed: u64,
}

impl Default for WeakLabelConfig {
    fn default() -> Self {
        Self {
            marker_list: ["Therefore", "Accordingly", "For these reasons", "Consequently"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            negatives_per_positive: 3,
            min_negative_distance: 2,
            seed: 0,
        }
    }
}

impl WeakLabelConfig {
    pub fn validate(&self) -> Result<(), PairScoreError> {
        if self.marker_list.is_empty() || self.marker_list.iter().any(|m| m.trim().is_empty()) {
            return Err(PairScoreError::Config("marker list must contain non-empty markers".into()));
        }
        if self.negatives_per_positive < 1 {
            return Err(PairScoreError::Config("negatives_per_positive must be at least 1".into()));
        }
        if self.min_negative_distance < 2 {
            return Err(PairScoreError::Config("min_negative_distance must be at least 2".into()));
        }
        Ok(())
    }

    /// The marker that opens `sentence`, ignoring a leading `[n]` ordinal.
    pub fn marker_of(&self, sentence: &str) -> Option<&str> {
        let body = strip_ordinal(sentence);
        self.marker_list.iter().map(String::as_str).find(|m| {
            body.strip_prefix(m)
                .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphanumeric()))
        })
    }
}

fn ordinal_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\[\d+\]\s*").unwrap())
}

/// Removes a leading paragraph ordinal such as `[12] `.
pub fn strip_ordinal(sentence: &str) -> &str {
    match ordinal_re().find(sentence) {
        Some(m) => &sentence[m.end()..],
        None => sentence,
    }
}

/// Extracts weakly labeled pairs from every document.
///
/// Negatives are sampled without replacement from a generator seeded by
/// `(seed, document id)`, so output for a document does not depend on the
/// other documents or their order.
pub fn extract_weak_pairs(docs: &[CaseDocument], config: &WeakLabelConfig) -> Result<Vec<TextPair>, PairScoreError> {
    config.validate()?;
    let mut pairs = Vec::new();
    for doc in docs {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(config.seed, b'W', &doc.id));
        for (i, para) in doc.paragraphs.iter().enumerate().skip(1) {
            let support = i - 1;
            for sentence in &para.sentences {
                if config.marker_of(sentence).is_none() {
                    continue;
                }
                let left = strip_ordinal(sentence).to_string();
                pairs.push(TextPair {
                    left: left.clone(),
                    right: doc.paragraphs[support].text.clone(),
                    label: Some(PairLabel::Positive),
                });
                let far: Vec<usize> = (0..doc.paragraphs.len())
                    .filter(|&j| j.abs_diff(support) >= config.min_negative_distance)
                    .collect();
                let take = config.negatives_per_positive.min(far.len());
                let mut picked: Vec<usize> = index::sample(&mut rng, far.len(), take).into_iter().map(|k| far[k]).collect();
                picked.sort_unstable();
                for j in picked {
                    pairs.push(TextPair {
                        left: left.clone(),
                        right: doc.paragraphs[j].text.clone(),
                        label: Some(PairLabel::Negative),
                    });
                }
            }
        }
    }
    Ok(pairs)
}
