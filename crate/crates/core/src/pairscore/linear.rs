use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureHasher, PairFeatures, DEFAULT_DIM};
use super::{PairLabel, PairRef, PairScoreError, PairScorer, TextPair};
use crate::binfmt::{self, FormatError};
use crate::ScoreMatrix;

const MODEL_MAGIC: &str = "LPSC1";
const LOGIT_CLAMP: f64 = 30.0;

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: u32,
    pub l2: f64,
    /// Drives the per-epoch shuffle.
    pub seed: u64,
    pub dim: usize,
    pub hash_seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 5,
            l2: 1e-6,
            seed: 0,
            dim: DEFAULT_DIM,
            hash_seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), PairScoreError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(PairScoreError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(PairScoreError::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        FeatureHasher::new(self.hash_seed, self.dim)?;
        Ok(())
    }
}

/// A featurized training example with target 1.0 (positive) or 0.0 (negative).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: Vec<(u32, f64)>,
    pub target: f64,
}

/// Feature-hashed logistic pair classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPairScorer {
    hasher: FeatureHasher,
    weights: Vec<f64>,
    bias: f64,
    trained_epochs: u32,
    trained: bool,
}

impl LinearPairScorer {
    /// A zero-weight scorer that has not been through training.
    pub fn untrained(hash_seed: u64, dim: usize) -> Result<Self, PairScoreError> {
        Ok(Self {
            hasher: FeatureHasher::new(hash_seed, dim)?,
            weights: vec![0.0; dim],
            bias: 0.0,
            trained_epochs: 0,
            trained: false,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.hasher.dim()
    }

    pub fn hash_seed(&self) -> u64 {
        self.hasher.seed()
    }

    pub fn trained_epochs(&self) -> u32 {
        self.trained_epochs
    }

    /// False only for scorers built with [`LinearPairScorer::untrained`].
    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn hasher(&self) -> &FeatureHasher {
        &self.hasher
    }

    pub fn featurize(&self, left: &str, right: &str) -> PairFeatures {
        self.hasher.featurize(left, right)
    }

    pub fn logit(&self, features: &[(u32, f64)]) -> f64 {
        self.bias + features.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>()
    }

    /// `logistic(w·x + b)`; the logit is clamped to ±30 so the output stays
    /// strictly inside (0, 1).
    pub fn score_texts(&self, left: &str, right: &str) -> f64 {
        let f = self.featurize(left, right);
        sigmoid(self.logit(&f.entries).clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
    }

    /// Further SGD epochs starting from the current weights, keeping the
    /// hashing configuration; `params.dim` and `params.hash_seed` are ignored.
    pub fn continue_training(&self, pairs: &[TextPair], params: &TrainParams) -> Result<(Self, Vec<f64>), PairScoreError> {
        let params = TrainParams {
            dim: self.dim(),
            hash_seed: self.hash_seed(),
            ..params.clone()
        };
        params.validate()?;
        let examples = examples_from_pairs(&self.hasher, pairs)?;
        let mut model = self.clone();
        let history = model.run_sgd(&examples, &params);
        Ok((model, history))
    }

    fn run_sgd(&mut self, examples: &[TrainingExample], params: &TrainParams) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut history = Vec::with_capacity(params.epochs as usize);
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let ex = &examples[i];
                let g = sigmoid(self.logit(&ex.features)) - ex.target;
                for &(j, v) in &ex.features {
                    let w = &mut self.weights[j as usize];
                    *w -= params.lr * (g * v + params.l2 * *w);
                }
                self.bias -= params.lr * g;
            }
            self.trained_epochs += 1;
            history.push(objective(&self.weights, self.bias, examples, params.l2));
        }
        self.trained = true;
        history
    }

    /// Writes the `LPSC1` layout: magic, flags, D, hash seed, bias, epochs, weights.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FormatError> {
        binfmt::write_magic(w, MODEL_MAGIC)?;
        binfmt::write_u8(w, self.trained as u8)?;
        binfmt::write_u32(w, binfmt::len_u32(self.dim())?)?;
        binfmt::write_u64(w, self.hash_seed())?;
        binfmt::write_f64(w, self.bias)?;
        binfmt::write_u32(w, self.trained_epochs)?;
        for &x in &self.weights {
            binfmt::write_f64(w, x)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        binfmt::read_magic(r, MODEL_MAGIC)?;
        let trained = match binfmt::read_u8(r)? {
            0 => false,
            1 => true,
            other => return Err(FormatError::Invalid(format!("bad trained flag {other}"))),
        };
        let dim = binfmt::read_u32(r)? as usize;
        let hash_seed = binfmt::read_u64(r)?;
        let hasher = FeatureHasher::new(hash_seed, dim).map_err(|e| FormatError::Invalid(e.to_string()))?;
        let bias = binfmt::read_f64(r)?;
        let trained_epochs = binfmt::read_u32(r)?;
        let mut weights = Vec::with_capacity(dim);
        for _ in 0..dim {
            weights.push(binfmt::read_f64(r)?);
        }
        binfmt::expect_eof(r)?;
        Ok(Self {
            hasher,
            weights,
            bias,
            trained_epochs,
            trained,
        })
    }
}

impl PairScorer for LinearPairScorer {
    fn score(&self, pair: &PairRef<'_>) -> f64 {
        self.score_texts(pair.left, pair.right)
    }

    fn score_block(&self, _query_id: &str, _candidate_id: &str, left: &[&str], right: &[&str]) -> (ScoreMatrix, bool) {
        let lp: Vec<_> = left.iter().map(|t| self.hasher.prepare(t, &self.weights)).collect();
        let rp: Vec<_> = right.iter().map(|t| self.hasher.prepare(t, &self.weights)).collect();
        let overlap_weight = self.weights[self.hasher.overlap_index() as usize];
        let m = ScoreMatrix::from_fn(lp.len(), rp.len(), |i, j| {
            let z = self.bias + self.hasher.prepared_dot(&lp[i], &rp[j], overlap_weight);
            sigmoid(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
        });
        (m, true)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - y·z`, computed without overflow.
fn log_loss(z: f64, target: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - target * z
}

/// Mean logistic loss plus `l2/2 · ||w||²`.
pub fn objective(weights: &[f64], bias: f64, examples: &[TrainingExample], l2: f64) -> f64 {
    let data: f64 = examples
        .iter()
        .map(|ex| {
            let z = bias + ex.features.iter().map(|&(i, v)| weights[i as usize] * v).sum::<f64>();
            log_loss(z, ex.target)
        })
        .sum::<f64>()
        / examples.len().max(1) as f64;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`objective`] with respect to `(weights, bias)`.
pub fn objective_gradient(weights: &[f64], bias: f64, examples: &[TrainingExample], l2: f64) -> (Vec<f64>, f64) {
    let n = examples.len().max(1) as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for ex in examples {
        let z = bias + ex.features.iter().map(|&(i, v)| weights[i as usize] * v).sum::<f64>();
        let g = (sigmoid(z) - ex.target) / n;
        for &(i, v) in &ex.features {
            grad[i as usize] += g * v;
        }
        grad_bias += g;
    }
    (grad, grad_bias)
}

/// Featurizes labeled pairs. Unlabeled pairs are rejected.
pub fn examples_from_pairs(hasher: &FeatureHasher, pairs: &[TextPair]) -> Result<Vec<TrainingExample>, PairScoreError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let target = match p.label {
                Some(PairLabel::Positive) => 1.0,
                Some(PairLabel::Negative) => 0.0,
                None => return Err(PairScoreError::Training(format!("pair {i} has no label"))),
            };
            Ok(TrainingExample {
                features: hasher.featurize(&p.left, &p.right).entries,
                target,
            })
        })
        .collect()
}

/// Trains a fresh scorer with shuffled SGD on the logistic loss.
pub fn train(pairs: &[TextPair], params: &TrainParams) -> Result<LinearPairScorer, PairScoreError> {
    train_with_history(pairs, params).map(|(m, _)| m)
}

/// Like [`train`], also returning the full-data objective after each epoch.
pub fn train_with_history(pairs: &[TextPair], params: &TrainParams) -> Result<(LinearPairScorer, Vec<f64>), PairScoreError> {
    params.validate()?;
    let has_pos = pairs.iter().any(|p| p.label == Some(PairLabel::Positive));
    let has_neg = pairs.iter().any(|p| p.label == Some(PairLabel::Negative));
    if !(has_pos && has_neg) {
        return Err(PairScoreError::Training("training pairs must contain both labels".into()));
    }
    let mut model = LinearPairScorer::untrained(params.hash_seed, params.dim)?;
    let examples = examples_from_pairs(&model.hasher, pairs)?;
    let history = model.run_sgd(&examples, params);
    Ok((model, history))
}
