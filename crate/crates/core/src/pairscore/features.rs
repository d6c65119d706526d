use std::collections::{BTreeMap, BTreeSet};

use crate::lexical::{tokenize, TokenizerConfig};

use super::PairScoreError;

pub const DEFAULT_DIM: usize = 1 << 18;

const NS_LEFT: u8 = b'L';
const NS_RIGHT: u8 = b'R';
const NS_SHARED: u8 = b'X';
const NS_OVERLAP: u8 = b'O';

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit FNV-1a with a splitmix finalizer. Stable across platforms.
pub(crate) fn stable_hash(seed: u64, namespace: u8, feature: &str) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for &byte in std::iter::once(&namespace).chain(&[0xff]).chain(feature.as_bytes()) {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Hashed sparse features of one text pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    /// `(index, value)` sorted by index; colliding features are summed.
    pub entries: Vec<(u32, f64)>,
    /// `|tokens(left) ∩ tokens(right)| / |tokens(left) ∪ tokens(right)|`.
    pub overlap_ratio: f64,
}

/// Maps text pairs into a `dim`-dimensional hashed feature space.
///
/// Indicator features are unigrams and bigrams of each side (namespaces `L`
/// and `R`) and every shared token (namespace `X`). Together they are scaled
/// to unit L2 norm. The overlap ratio is added as one real-valued feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureHasher {
    seed: u64,
    dim: usize,
    tokenizer: TokenizerConfig,
}

impl FeatureHasher {
    pub fn new(seed: u64, dim: usize) -> Result<Self, PairScoreError> {
        if dim < 2 || !dim.is_power_of_two() || dim > u32::MAX as usize {
            return Err(PairScoreError::Config(format!("feature dimension must be a power of two >= 2, got {dim}")));
        }
        Ok(Self {
            seed,
            dim,
            tokenizer: TokenizerConfig::default(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, namespace: u8, feature: &str) -> u32 {
        (stable_hash(self.seed, namespace, feature) & (self.dim as u64 - 1)) as u32
    }

    /// Index that carries the overlap-ratio feature.
    pub fn overlap_index(&self) -> u32 {
        self.index(NS_OVERLAP, "overlap_ratio")
    }

    pub fn featurize(&self, left: &str, right: &str) -> PairFeatures {
        let lt = tokenize(left, &self.tokenizer);
        let rt = tokenize(right, &self.tokenizer);
        let lset: BTreeSet<&str> = lt.iter().map(String::as_str).collect();
        let rset: BTreeSet<&str> = rt.iter().map(String::as_str).collect();

        let mut indicators: Vec<(u8, String)> = Vec::new();
        for (ns, toks, set) in [(NS_LEFT, &lt, &lset), (NS_RIGHT, &rt, &rset)] {
            indicators.extend(set.iter().map(|t| (ns, t.to_string())));
            let bigrams: BTreeSet<String> = toks.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
            indicators.extend(bigrams.into_iter().map(|b| (ns, b)));
        }
        let shared: Vec<&str> = lset.intersection(&rset).copied().collect();
        indicators.extend(shared.iter().map(|t| (NS_SHARED, t.to_string())));

        let union = lset.union(&rset).count();
        let overlap_ratio = if union == 0 {
            0.0
        } else {
            shared.len() as f64 / union as f64
        };

        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        if !indicators.is_empty() {
            let value = 1.0 / (indicators.len() as f64).sqrt();
            for (ns, feat) in &indicators {
                *acc.entry(self.index(*ns, feat)).or_default() += value;
            }
        }
        if overlap_ratio > 0.0 {
            *acc.entry(self.overlap_index()).or_default() += overlap_ratio;
        }
        PairFeatures {
            entries: acc.into_iter().collect(),
            overlap_ratio,
        }
    }
}

/// The per-text half of the pair features under fixed weights, so that a
/// block of pairs featurizes each text once.
#[derive(Debug, Clone)]
pub(crate) struct PreparedText {
    /// Distinct tokens, sorted, with the weight of their shared-token feature.
    tokens: Vec<(String, f64)>,
    /// Unigram plus bigram indicators of this text as one side.
    indicators: usize,
    left_sum: f64,
    right_sum: f64,
}

impl FeatureHasher {
    pub(crate) fn prepare(&self, text: &str, weights: &[f64]) -> PreparedText {
        let toks = tokenize(text, &self.tokenizer);
        let set: BTreeSet<&str> = toks.iter().map(String::as_str).collect();
        let bigrams: BTreeSet<String> = toks.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
        let side_sum = |ns: u8| -> f64 {
            set.iter().map(|t| weights[self.index(ns, t) as usize]).sum::<f64>()
                + bigrams.iter().map(|b| weights[self.index(ns, b) as usize]).sum::<f64>()
        };
        PreparedText {
            left_sum: side_sum(NS_LEFT),
            right_sum: side_sum(NS_RIGHT),
            indicators: set.len() + bigrams.len(),
            tokens: set
                .iter()
                .map(|t| (t.to_string(), weights[self.index(NS_SHARED, t) as usize]))
                .collect(),
        }
    }

    /// `w·x` for the pair `(left, right)`, without the bias. Equal to the dot
    /// product over [`FeatureHasher::featurize`] up to summation order.
    pub(crate) fn prepared_dot(&self, left: &PreparedText, right: &PreparedText, overlap_weight: f64) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut shared, mut shared_sum) = (0usize, 0.0);
        while i < left.tokens.len() && j < right.tokens.len() {
            match left.tokens[i].0.cmp(&right.tokens[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    shared_sum += left.tokens[i].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let n = left.indicators + right.indicators + shared;
        let mut dot = 0.0;
        if n > 0 {
            dot += (left.left_sum + right.right_sum + shared_sum) / (n as f64).sqrt();
        }
        let union = left.tokens.len() + right.tokens.len() - shared;
        if shared > 0 {
            dot += overlap_weight * (shared as f64 / union as f64);
        }
        dot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sides_have_full_overlap() {
        let h = FeatureHasher::new(1, 1 << 10).unwrap();
        let f = h.featurize("the lien holder", "the lien holder");
        assert_eq!(f.overlap_ratio, 1.0);
    }

    #[test]
    fn disjoint_sides_have_no_shared_features() {
        let h = FeatureHasher::new(1, 1 << 20).unwrap();
        let f = h.featurize("alpha beta", "gamma delta");
        assert_eq!(f.overlap_ratio, 0.0);
        let shared_probe = h.index(NS_SHARED, "alpha");
        let with_shared = h.featurize("alpha beta", "alpha delta");
        assert!(with_shared.entries.iter().any(|&(i, _)| i == shared_probe));
        // 2 unigrams + 1 bigram per side, nothing else
        assert_eq!(f.entries.len(), 6);
    }

    #[test]
    fn seeds_move_indices_but_not_overlap() {
        let a = FeatureHasher::new(7, 1 << 18).unwrap().featurize("lien holder claim", "holder of a claim");
        let b = FeatureHasher::new(8, 1 << 18).unwrap().featurize("lien holder claim", "holder of a claim");
        let ia: Vec<u32> = a.entries.iter().map(|e| e.0).collect();
        let ib: Vec<u32> = b.entries.iter().map(|e| e.0).collect();
        assert_ne!(ia, ib);
        assert_eq!(a.overlap_ratio, b.overlap_ratio);
        assert!((a.overlap_ratio - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_must_be_power_of_two() {
        assert!(FeatureHasher::new(0, 1000).is_err());
        assert!(FeatureHasher::new(0, 1).is_err());
        assert!(FeatureHasher::new(0, 1024).is_ok());
    }

    #[test]
    fn hashing_is_stable() {
        // Frozen so that persisted models stay valid across releases.
        assert_eq!(stable_hash(0, b'L', "lien"), 2441291686306081059);
        assert_ne!(stable_hash(0, b'L', "lien"), stable_hash(0, b'R', "lien"));
        assert_ne!(stable_hash(0, b'L', "lien"), stable_hash(1, b'L', "lien"));
    }
}
