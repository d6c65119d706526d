use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::tokenize::{tokenize, TokenizerConfig};
use super::{read_tokenizer_config, write_tokenizer_config, LexicalError};
use crate::binfmt::{self, FormatError};

const TFIDF_MAGIC: &str = "LTFV1";

/// Sparse non-negative vector keyed by vocabulary dimension, sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds from unsorted entries, summing duplicates.
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in entries {
            *acc.entry(i).or_default() += v;
        }
        Self {
            entries: acc.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

/// Cosine similarity of two non-negative vectors, clamped to [0, 1].
/// Zero-norm inputs have similarity 0.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(0.0, 1.0)
}

/// Tf-idf vectorizer with `idf(t) = ln(N / df(t)) + 1` and raw term counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    config: TokenizerConfig,
    vocabulary: BTreeMap<String, u32>,
    idf: Vec<f64>,
    fitted_on: String,
}

impl TfidfModel {
    pub fn fit<T: AsRef<str>>(units: &[T], config: &TokenizerConfig) -> Result<Self, LexicalError> {
        config.validate()?;
        if units.is_empty() {
            return Err(LexicalError::Argument("cannot fit tf-idf on zero units".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut hasher_input = Vec::new();
        for unit in units {
            let mut toks = tokenize(unit.as_ref(), config);
            toks.sort_unstable();
            toks.dedup();
            for t in toks {
                *df.entry(t).or_default() += 1;
            }
            hasher_input.extend_from_slice(unit.as_ref().as_bytes());
            hasher_input.push(0);
        }
        let n = units.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (dim, (tok, count)) in df.into_iter().enumerate() {
            vocabulary.insert(tok, dim as u32);
            idf.push((n / count as f64).ln() + 1.0);
        }
        Ok(Self {
            config: config.clone(),
            vocabulary,
            idf,
            fitted_on: crate::fingerprint(&hasher_input),
        })
    }

    /// A model with no vocabulary, i.e. not fitted.
    pub fn unfitted(config: &TokenizerConfig) -> Self {
        Self {
            config: config.clone(),
            vocabulary: BTreeMap::new(),
            idf: Vec::new(),
            fitted_on: String::new(),
        }
    }

    pub fn is_fitted(&self) -> bool {
        !self.vocabulary.is_empty()
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u32> {
        &self.vocabulary
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&d| self.idf[d as usize])
    }

    /// SHA-256 over the fitted unit texts.
    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    /// Raw (unnormalized) tf·idf vector; out-of-vocabulary tokens are ignored.
    pub fn vector(&self, text: &str) -> SparseVector {
        SparseVector::from_entries(
            tokenize(text, &self.config)
                .iter()
                .filter_map(|t| self.vocabulary.get(t))
                .map(|&d| (d, self.idf[d as usize])),
        )
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FormatError> {
        binfmt::write_magic(w, TFIDF_MAGIC)?;
        write_tokenizer_config(w, &self.config)?;
        binfmt::write_str(w, &self.fitted_on)?;
        binfmt::write_u32(w, binfmt::len_u32(self.vocabulary.len())?)?;
        // BTreeMap order equals dimension order because dimensions are assigned in sorted order.
        for (tok, &dim) in &self.vocabulary {
            binfmt::write_str(w, tok)?;
            binfmt::write_f64(w, self.idf[dim as usize])?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        binfmt::read_magic(r, TFIDF_MAGIC)?;
        let config = read_tokenizer_config(r)?;
        let fitted_on = binfmt::read_str(r)?;
        let n = binfmt::read_u32(r)? as usize;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(n);
        let mut prev: Option<String> = None;
        for dim in 0..n {
            let tok = binfmt::read_str(r)?;
            if prev.as_ref().is_some_and(|p| p >= &tok) {
                return Err(FormatError::Invalid("vocabulary not strictly sorted".into()));
            }
            let weight = binfmt::read_f64(r)?;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(FormatError::Invalid(format!("non-positive idf for {tok:?}")));
            }
            prev = Some(tok.clone());
            vocabulary.insert(tok, dim as u32);
            idf.push(weight);
        }
        binfmt::expect_eof(r)?;
        Ok(Self {
            config,
            vocabulary,
            idf,
            fitted_on,
        })
    }
}

/// A unit and its cosine similarity to a query.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankedUnit {
    pub id: String,
    pub similarity: f64,
}

/// Pre-vectorized units for repeated cosine ranking against one model.
#[derive(Debug, Clone)]
pub struct TfidfCorpus {
    ids: Vec<String>,
    vectors: Vec<SparseVector>,
}

impl TfidfCorpus {
    pub fn new<K, T>(model: &TfidfModel, units: &[(K, T)]) -> Result<Self, LexicalError>
    where
        K: AsRef<str>,
        T: AsRef<str>,
    {
        if !model.is_fitted() {
            return Err(LexicalError::State("tf-idf model is not fitted".into()));
        }
        Ok(Self {
            ids: units.iter().map(|(id, _)| id.as_ref().to_string()).collect(),
            vectors: units.iter().map(|(_, text)| model.vector(text.as_ref())).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Every unit ranked by descending similarity, ties broken by ascending id.
    pub fn rank_all(&self, model: &TfidfModel, query_text: &str) -> Vec<RankedUnit> {
        let q = model.vector(query_text);
        let mut ranked: Vec<RankedUnit> = self
            .ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| RankedUnit {
                id: id.clone(),
                similarity: cosine_similarity(&q, v),
            })
            .collect();
        ranked.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.id.cmp(&b.id)));
        ranked
    }

    pub fn rank_topk(&self, model: &TfidfModel, query_text: &str, k: usize) -> Result<Vec<RankedUnit>, LexicalError> {
        if k < 1 {
            return Err(LexicalError::Argument("k must be at least 1".into()));
        }
        let mut ranked = self.rank_all(model, query_text);
        ranked.truncate(k);
        Ok(ranked)
    }
}

/// Ranks `units` against `query_text` and keeps the best `k`.
pub fn cosine_rank_topk<K, T>(
    model: &TfidfModel,
    query_text: &str,
    units: &[(K, T)],
    k: usize,
) -> Result<Vec<RankedUnit>, LexicalError>
where
    K: AsRef<str>,
    T: AsRef<str>,
{
    if k < 1 {
        return Err(LexicalError::Argument("k must be at least 1".into()));
    }
    TfidfCorpus::new(model, units)?.rank_topk(model, query_text, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TokenizerConfig {
        TokenizerConfig::default()
    }

    #[test]
    fn single_unit_idf_is_one() {
        let m = TfidfModel::fit(&["lien holder lien"], &cfg()).unwrap();
        assert_eq!(m.idf("lien"), Some(1.0));
        assert_eq!(m.idf("holder"), Some(1.0));
        let v = m.vector("lien lien holder");
        assert_eq!(v.get(m.vocabulary()["lien"]), 2.0);
    }

    #[test]
    fn oov_text_is_zero_vector() {
        let m = TfidfModel::fit(&["alpha beta"], &cfg()).unwrap();
        assert!(m.vector("gamma delta").is_zero());
        assert!(m.vector("").is_zero());
    }

    #[test]
    fn fit_requires_units() {
        let none: [&str; 0] = [];
        assert!(TfidfModel::fit(&none, &cfg()).is_err());
    }

    #[test]
    fn vocabulary_is_dense_and_sorted() {
        let m = TfidfModel::fit(&["b a", "c a"], &cfg()).unwrap();
        let dims: Vec<u32> = m.vocabulary().values().copied().collect();
        assert_eq!(dims, vec![0, 1, 2]);
        assert_eq!(m.vocabulary()["a"], 0);
        assert!((m.idf("b").unwrap() - (2f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn identical_query_ranks_first() {
        let m = TfidfModel::fit(&["lien holder claim", "co owner share", "agent consent"], &cfg()).unwrap();
        let units = [("a1", "lien holder claim"), ("a2", "co owner share"), ("a3", "agent consent")];
        let ranked = cosine_rank_topk(&m, "co owner share", &units, 3).unwrap();
        assert_eq!(ranked[0].id, "a2");
        assert!((ranked[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_query_orders_by_id() {
        let m = TfidfModel::fit(&["x y", "z w", "u v"], &cfg()).unwrap();
        let units = [("c", "x y"), ("a", "z w"), ("b", "u v")];
        let ranked = cosine_rank_topk(&m, "nothing here", &units, 2).unwrap();
        assert_eq!(ranked.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert!(ranked.iter().all(|r| r.similarity == 0.0));
    }

    #[test]
    fn k_validated_and_state_checked() {
        let m = TfidfModel::fit(&["x"], &cfg()).unwrap();
        assert!(cosine_rank_topk(&m, "x", &[("a", "x")], 0).is_err());
        let unfitted = TfidfModel::unfitted(&cfg());
        assert!(matches!(
            cosine_rank_topk(&unfitted, "x", &[("a", "x")], 1),
            Err(LexicalError::State(_))
        ));
    }

    #[test]
    fn binary_round_trip() {
        let m = TfidfModel::fit(&["lien holder claim", "co owner share lien"], &cfg()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"LTFV1");
        let back = TfidfModel::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
