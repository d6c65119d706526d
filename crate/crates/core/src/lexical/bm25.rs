use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenizerConfig};
use super::{read_tokenizer_config, write_tokenizer_config, LexicalError};
use crate::binfmt::{self, FormatError};
use crate::ScoreMatrix;

const INDEX_MAGIC: &str = "LIRX1";

/// Okapi BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, LexicalError> {
        let params = Self { k1, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), LexicalError> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(LexicalError::Config(format!("k1 must be a finite value >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(LexicalError::Config(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// One (unit, term frequency) entry of a posting list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the unit in [`InvertedIndex::unit_ids`].
    pub unit: u32,
    pub tf: u32,
}

/// Immutable term → postings index over retrieval units (paragraphs or articles).
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    config: TokenizerConfig,
    unit_ids: Vec<String>,
    unit_lookup: HashMap<String, u32>,
    doc_len: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    avgdl: f64,
}

impl InvertedIndex {
    /// Indexes `(unit_id, text)` pairs. Unit ids must be unique.
    pub fn build<I, K, T>(units: I, config: &TokenizerConfig) -> Result<Self, LexicalError>
    where
        I: IntoIterator<Item = (K, T)>,
        K: Into<String>,
        T: AsRef<str>,
    {
        config.validate()?;
        let mut unit_ids = Vec::new();
        let mut unit_lookup = HashMap::new();
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();

        for (id, text) in units {
            let id: String = id.into();
            let slot = binfmt::len_u32(unit_ids.len()).map_err(|e| LexicalError::Argument(e.to_string()))?;
            if unit_lookup.insert(id.clone(), slot).is_some() {
                return Err(LexicalError::DuplicateUnit(id));
            }
            let tokens = tokenize(text.as_ref(), config);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for tok in &tokens {
                *counts.entry(tok.clone()).or_default() += 1;
            }
            for (tok, tf) in counts {
                postings.entry(tok).or_default().push(Posting { unit: slot, tf });
            }
            doc_len.push(binfmt::len_u32(tokens.len()).map_err(|e| LexicalError::Argument(e.to_string()))?);
            unit_ids.push(id);
        }
        if unit_ids.is_empty() {
            return Err(LexicalError::Argument("cannot build an index over zero units".into()));
        }
        let avgdl = mean_length(&doc_len);
        Ok(Self {
            config: config.clone(),
            unit_ids,
            unit_lookup,
            doc_len,
            postings,
            avgdl,
        })
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn unit_count(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    /// Mean unit length in tokens. An index whose units contain no tokens at
    /// all reports 1.0 so that length normalization stays finite.
    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self, unit_id: &str) -> Option<u32> {
        self.unit_lookup.get(unit_id).map(|&slot| self.doc_len[slot as usize])
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn document_frequency(&self, token: &str) -> usize {
        self.postings(token).len()
    }

    pub fn term_frequency(&self, token: &str, unit_id: &str) -> u32 {
        let Some(&slot) = self.unit_lookup.get(unit_id) else {
            return 0;
        };
        self.tf_at(token, slot)
    }

    fn tf_at(&self, token: &str, slot: u32) -> u32 {
        let list = self.postings(token);
        list.binary_search_by_key(&slot, |p| p.unit)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`, never negative.
    pub fn idf(&self, token: &str) -> f64 {
        let n = self.unit_count() as f64;
        let df = self.document_frequency(token) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, params: &Bm25Params, idf: f64, tf: u32, dl: u32) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - params.b + params.b * dl as f64 / self.avgdl;
        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    }

    /// BM25 scores of `query_tokens` against every unit, in unit order.
    pub fn score_all(&self, params: &Bm25Params, query_tokens: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.unit_count()];
        for tok in query_tokens {
            let list = self.postings(tok);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(tok);
            for p in list {
                scores[p.unit as usize] += self.term_weight(params, idf, p.tf, self.doc_len[p.unit as usize]);
            }
        }
        scores
    }

    /// Writes the index in the `LIRX1` binary layout. Output is a pure function
    /// of the indexed units and tokenizer config.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FormatError> {
        binfmt::write_magic(w, INDEX_MAGIC)?;
        write_tokenizer_config(w, &self.config)?;
        binfmt::write_u32(w, binfmt::len_u32(self.unit_ids.len())?)?;
        for (id, len) in self.unit_ids.iter().zip(&self.doc_len) {
            binfmt::write_str(w, id)?;
            binfmt::write_u32(w, *len)?;
        }
        binfmt::write_u32(w, binfmt::len_u32(self.postings.len())?)?;
        for (term, list) in &self.postings {
            binfmt::write_str(w, term)?;
            binfmt::write_u32(w, binfmt::len_u32(list.len())?)?;
            for p in list {
                binfmt::write_u32(w, p.unit)?;
                binfmt::write_u32(w, p.tf)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        binfmt::read_magic(r, INDEX_MAGIC)?;
        let config = read_tokenizer_config(r)?;
        let n_units = binfmt::read_u32(r)? as usize;
        if n_units == 0 {
            return Err(FormatError::Invalid("index has zero units".into()));
        }
        let mut unit_ids = Vec::with_capacity(n_units);
        let mut unit_lookup = HashMap::with_capacity(n_units);
        let mut doc_len = Vec::with_capacity(n_units);
        for slot in 0..n_units {
            let id = binfmt::read_str(r)?;
            if unit_lookup.insert(id.clone(), slot as u32).is_some() {
                return Err(FormatError::Invalid(format!("duplicate unit id {id:?}")));
            }
            unit_ids.push(id);
            doc_len.push(binfmt::read_u32(r)?);
        }
        let n_terms = binfmt::read_u32(r)? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..n_terms {
            let term = binfmt::read_str(r)?;
            let n = binfmt::read_u32(r)? as usize;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let unit = binfmt::read_u32(r)?;
                let tf = binfmt::read_u32(r)?;
                if unit as usize >= n_units || tf == 0 {
                    return Err(FormatError::Invalid(format!("bad posting for term {term:?}")));
                }
                list.push(Posting { unit, tf });
            }
            if !list.windows(2).all(|w| w[0].unit < w[1].unit) {
                return Err(FormatError::Invalid(format!("unsorted postings for term {term:?}")));
            }
            postings.insert(term, list);
        }
        binfmt::expect_eof(r)?;
        let avgdl = mean_length(&doc_len);
        Ok(Self {
            config,
            unit_ids,
            unit_lookup,
            doc_len,
            postings,
            avgdl,
        })
    }
}

fn mean_length(doc_len: &[u32]) -> f64 {
    let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
    if total == 0 {
        1.0
    } else {
        total as f64 / doc_len.len() as f64
    }
}

/// BM25 score of one unit. Repeated query tokens contribute once per occurrence.
pub fn bm25_score(
    index: &InvertedIndex,
    params: &Bm25Params,
    query_tokens: &[String],
    unit_id: &str,
) -> Result<f64, LexicalError> {
    let slot = *index
        .unit_lookup
        .get(unit_id)
        .ok_or_else(|| LexicalError::UnknownUnit(unit_id.to_string()))?;
    let dl = index.doc_len[slot as usize];
    let mut score = 0.0;
    for tok in query_tokens {
        let tf = index.tf_at(tok, slot);
        if tf > 0 {
            score += index.term_weight(params, index.idf(tok), tf, dl);
        }
    }
    Ok(score)
}

/// Paragraph-by-paragraph BM25 matrix. The index is built over the candidate
/// paragraphs only; row `i` scores query paragraph `i` against every candidate.
pub fn bm25_pair_matrix<Q, C>(
    query_paragraphs: &[Q],
    candidate_paragraphs: &[C],
    params: &Bm25Params,
    config: &TokenizerConfig,
) -> Result<ScoreMatrix, LexicalError>
where
    Q: AsRef<str>,
    C: AsRef<str>,
{
    if query_paragraphs.is_empty() || candidate_paragraphs.is_empty() {
        return Err(LexicalError::Argument("pair matrix needs at least one paragraph on each side".into()));
    }
    params.validate()?;
    let index = InvertedIndex::build(
        candidate_paragraphs.iter().enumerate().map(|(j, p)| (j.to_string(), p.as_ref())),
        config,
    )?;
    let mut matrix = ScoreMatrix::zeros(query_paragraphs.len(), candidate_paragraphs.len());
    for (i, q) in query_paragraphs.iter().enumerate() {
        let tokens = tokenize(q.as_ref(), config);
        for (j, s) in index.score_all(params, &tokens).into_iter().enumerate() {
            matrix.set(i, j, s);
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, &TokenizerConfig::default())
    }

    fn lien_index() -> InvertedIndex {
        InvertedIndex::build(
            [
                ("d1", "statutory lien lien"),
                ("d2", "statutory rights"),
                ("d3", "usufructuary rights"),
            ],
            &TokenizerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn one_token_units() {
        let idx = InvertedIndex::build([("a", "x"), ("b", "y"), ("c", "z")], &TokenizerConfig::default()).unwrap();
        assert_eq!(idx.unit_count(), 3);
        assert_eq!(idx.avgdl(), 1.0);
    }

    #[test]
    fn repeated_token_counts() {
        let idx = lien_index();
        assert_eq!(idx.term_frequency("lien", "d1"), 2);
        assert_eq!(idx.document_frequency("rights"), 2);
        assert_eq!(idx.doc_len("d1"), Some(3));
    }

    #[test]
    fn duplicate_and_empty_inputs() {
        let dup = InvertedIndex::build([("a", "x"), ("a", "y")], &TokenizerConfig::default());
        assert!(matches!(dup, Err(LexicalError::DuplicateUnit(id)) if id == "a"));
        let none: [(&str, &str); 0] = [];
        assert!(matches!(
            InvertedIndex::build(none, &TokenizerConfig::default()),
            Err(LexicalError::Argument(_))
        ));
    }

    #[test]
    fn hand_evaluated_lien_score() {
        // df=1, N=3, tf=2, dl=3, avgdl=7/3
        let idf = (2.5f64 / 1.5 + 1.0).ln();
        let expected = idf * 2.0 * 2.2 / (2.0 + 1.2 * (0.25 + 0.75 * 3.0 / (7.0 / 3.0)));
        let got = bm25_score(&lien_index(), &Bm25Params::default(), &toks("lien"), "d1").unwrap();
        assert!((got - expected).abs() < 1e-12);
        // exact value is 1.248328, quoted elsewhere as 1.2484
        assert!((got - 1.2484).abs() < 1e-4);
    }

    #[test]
    fn absent_terms_score_zero() {
        let idx = lien_index();
        let p = Bm25Params::default();
        assert_eq!(bm25_score(&idx, &p, &toks("contract"), "d1").unwrap(), 0.0);
        assert_eq!(bm25_score(&idx, &p, &toks("lien"), "d3").unwrap(), 0.0);
        let doubled = Bm25Params { k1: 2.4, ..p };
        assert_eq!(bm25_score(&idx, &doubled, &toks("lien"), "d3").unwrap(), 0.0);
    }

    #[test]
    fn repeated_query_terms_accumulate() {
        let idx = lien_index();
        let p = Bm25Params::default();
        let once = bm25_score(&idx, &p, &toks("lien"), "d1").unwrap();
        let twice = bm25_score(&idx, &p, &toks("lien lien"), "d1").unwrap();
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn unknown_unit() {
        let err = bm25_score(&lien_index(), &Bm25Params::default(), &toks("lien"), "d9");
        assert!(matches!(err, Err(LexicalError::UnknownUnit(_))));
    }

    #[test]
    fn score_all_agrees_with_single_unit_scoring() {
        let idx = lien_index();
        let p = Bm25Params::default();
        let q = toks("statutory rights lien");
        let all = idx.score_all(&p, &q);
        for (slot, id) in idx.unit_ids().iter().enumerate() {
            assert!((all[slot] - bm25_score(&idx, &p, &q, id).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validated() {
        assert!(Bm25Params::new(-0.1, 0.5).is_err());
        assert!(Bm25Params::new(1.2, 1.5).is_err());
        assert!(Bm25Params::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn pair_matrix_edges() {
        let p = Bm25Params::default();
        let cfg = TokenizerConfig::default();
        let m = bm25_pair_matrix(&["alpha beta"], &["gamma delta"], &p, &cfg).unwrap();
        assert_eq!(m.values(), &[0.0]);
        let m = bm25_pair_matrix(&["lien holder"], &["lien holder"], &p, &cfg).unwrap();
        assert!(m.get(0, 0) > 0.0);
        let empty: [&str; 0] = [];
        assert!(bm25_pair_matrix(&empty, &["x"], &p, &cfg).is_err());
        assert!(bm25_pair_matrix(&["x"], &empty, &p, &cfg).is_err());
    }

    #[test]
    fn binary_round_trip_and_magic() {
        let idx = lien_index();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"LIRX1");
        let back = InvertedIndex::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);

        buf[0] = b'X';
        assert!(matches!(
            InvertedIndex::read_from(&mut buf.as_slice()),
            Err(FormatError::BadMagic { .. })
        ));
    }
}
