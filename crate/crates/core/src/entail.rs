//! Yes/no answering for bar questions.
//!
//! Two approaches are provided. The entailment approach pairs a question
//! with its articles and answers Yes when any pair is judged positive. The
//! lawfulness approach classifies the question text on its own, using a
//! unary [`LinearPairScorer`] trained on Civil Code sentences, labeled
//! questions and their negated variants.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Answer, BarQuestion, SentenceSplitter, StatuteArticle};
use crate::lexical::{LexicalError, TfidfCorpus, TfidfModel};
use crate::pairscore::{train, LinearPairScorer, PairLabel, PairRef, PairScoreError, PairScorer, TextPair, TrainParams};

/// Placed between question and article in [`EntailmentPair::joined_text`].
pub const PAIR_SEPARATOR: &str = " [SEP] ";

/// Tf-idf articles added to the gold articles of each question.
pub const EXTRA_ARTICLES: usize = 2;

#[derive(Debug, Error)]
pub enum EntailError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("question {question:?} refers to unknown article {article:?}")]
    UnknownArticle { question: String, article: String },
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    PairScore(#[from] PairScoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A (question, article) pair and the classifier's verdict on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentPair {
    pub question_id: String,
    pub article_id: String,
    pub question_text: String,
    pub article_text: String,
    pub joined_text: String,
    #[serde(default)]
    pub predicted: Option<PairLabel>,
}

impl EntailmentPair {
    fn new(question: &BarQuestion, article: &StatuteArticle) -> Self {
        let article_text = article.retrieval_text();
        Self {
            question_id: question.id.clone(),
            article_id: article.id.clone(),
            joined_text: format!("{}{PAIR_SEPARATOR}{}", question.content, article_text),
            question_text: question.content.clone(),
            article_text,
            predicted: None,
        }
    }
}

/// Pairs `question` with every gold article followed by the Tf-idf top-2
/// articles not already present.
pub fn build_entailment_pairs(
    question: &BarQuestion,
    gold_article_ids: &BTreeSet<String>,
    model: &TfidfModel,
    articles: &[StatuteArticle],
) -> Result<Vec<EntailmentPair>, EntailError> {
    if !model.is_fitted() {
        return Err(EntailError::State("tf-idf model is not fitted".into()));
    }
    let by_id: HashMap<&str, &StatuteArticle> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut pairs = Vec::with_capacity(gold_article_ids.len() + EXTRA_ARTICLES);
    for id in gold_article_ids {
        let article = by_id.get(id.as_str()).ok_or_else(|| EntailError::UnknownArticle {
            question: question.id.clone(),
            article: id.clone(),
        })?;
        pairs.push(EntailmentPair::new(question, article));
    }
    if articles.is_empty() {
        return Ok(pairs);
    }
    let units: Vec<(&str, String)> = articles.iter().map(|a| (a.id.as_str(), a.retrieval_text())).collect();
    let top = TfidfCorpus::new(model, &units)?.rank_topk(model, &question.content, EXTRA_ARTICLES)?;
    for unit in top {
        if !gold_article_ids.contains(&unit.id) {
            pairs.push(EntailmentPair::new(question, by_id[unit.id.as_str()]));
        }
    }
    Ok(pairs)
}

/// Sets each pair's verdict: positive when `scorer` gives at least `threshold`.
/// The question is always the left side.
pub fn classify_pairs(pairs: &mut [EntailmentPair], scorer: &dyn PairScorer, threshold: f64) {
    for pair in pairs {
        let score = scorer.score(&PairRef {
            query_id: &pair.question_id,
            candidate_id: &pair.article_id,
            left: &pair.question_text,
            right: &pair.article_text,
        });
        pair.predicted = Some(if score >= threshold {
            PairLabel::Positive
        } else {
            PairLabel::Negative
        });
    }
}

/// Yes iff at least one pair was classified positive.
pub fn answer_entailment(pairs: &[EntailmentPair]) -> Result<Answer, EntailError> {
    if pairs.is_empty() {
        return Err(EntailError::Argument("no pairs to answer from".into()));
    }
    let mut any_positive = false;
    for p in pairs {
        match p.predicted {
            Some(PairLabel::Positive) => any_positive = true,
            Some(PairLabel::Negative) => {}
            None => {
                return Err(EntailError::State(format!(
                    "pair ({}, {}) has no verdict",
                    p.question_id, p.article_id
                )))
            }
        }
    }
    Ok(if any_positive { Answer::Yes } else { Answer::No })
}

/// Words and pairs used by [`NegationLexicon::negate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationLexicon {
    /// Auxiliaries after which "not" is inserted or removed (lowercase).
    pub auxiliaries: Vec<String>,
    /// Word pairs swapped when the sentence has no auxiliary (lowercase).
    pub antonyms: Vec<(String, String)>,
}

impl Default for NegationLexicon {
    fn default() -> Self {
        let aux = [
            "shall", "may", "must", "will", "can", "should", "would", "could", "is", "are", "was", "were", "does",
            "do", "did", "has", "have",
        ];
        let antonyms = [
            ("valid", "invalid"),
            ("effective", "ineffective"),
            ("lawful", "unlawful"),
            ("possible", "impossible"),
            ("permitted", "prohibited"),
        ];
        Self {
            auxiliaries: aux.iter().map(|s| s.to_string()).collect(),
            antonyms: antonyms.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }
}

/// Byte spans of alphabetic words.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphabetic() || c == '\'', start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn match_case(template: &str, word: &str) -> String {
    let mut chars = template.chars();
    match chars.next() {
        Some(first) if first.is_uppercase() => {
            let mut w = word.chars();
            w.next()
                .map(|c| c.to_uppercase().chain(w).collect())
                .unwrap_or_default()
        }
        _ => word.to_string(),
    }
}

impl NegationLexicon {
    /// Flips the polarity of `sentence`.
    ///
    /// The first auxiliary gets a "not" inserted after it, or loses the
    /// "not" that already follows it. Without an auxiliary the first
    /// lexicon antonym is swapped. Returns `None` when no rule applies.
    /// Applying it twice restores the input when words are separated by
    /// single spaces.
    pub fn negate(&self, sentence: &str) -> Option<String> {
        let spans = word_spans(sentence);
        let word = |k: usize| sentence[spans[k].0..spans[k].1].to_lowercase();
        if let Some(k) = (0..spans.len()).find(|&k| self.auxiliaries.contains(&word(k))) {
            let end = spans[k].1;
            if k + 1 < spans.len() && word(k + 1) == "not" {
                return Some(format!("{}{}", &sentence[..end], &sentence[spans[k + 1].1..]));
            }
            return Some(format!("{} not{}", &sentence[..end], &sentence[end..]));
        }
        for (k, &(s, e)) in spans.iter().enumerate() {
            let w = word(k);
            let swap = self.antonyms.iter().find_map(|(a, b)| {
                if *a == w {
                    Some(b)
                } else if *b == w {
                    Some(a)
                } else {
                    None
                }
            });
            if let Some(other) = swap {
                return Some(format!("{}{}{}", &sentence[..s], match_case(&sentence[s..e], other), &sentence[e..]));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    CivilCodeSentence,
    BarQuestion,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawfulnessSample {
    pub text: String,
    pub label: Answer,
    pub origin: SampleOrigin,
}

/// Training data for the lawfulness classifier.
///
/// Every Civil Code sentence is a Yes sample and every labeled question
/// keeps its label. Each of them that [`NegationLexicon::negate`] can
/// transform also yields an augmented sample with the opposite label,
/// placed right after its source. Unlabeled questions are skipped.
pub fn augment_lawfulness(
    articles: &[StatuteArticle],
    questions: &[BarQuestion],
    lexicon: &NegationLexicon,
    splitter: &SentenceSplitter,
) -> Vec<LawfulnessSample> {
    let mut out = Vec::new();
    let mut push = |text: String, label: Answer, origin: SampleOrigin| {
        let negated = lexicon.negate(&text);
        out.push(LawfulnessSample { text, label, origin });
        if let Some(neg) = negated {
            out.push(LawfulnessSample {
                text: neg,
                label: label.flipped(),
                origin: SampleOrigin::Augmented,
            });
        }
    };
    for article in articles {
        for sentence in splitter.split(&article.content) {
            let sentence = sentence.trim();
            if !sentence.is_empty() {
                push(sentence.to_string(), Answer::Yes, SampleOrigin::CivilCodeSentence);
            }
        }
    }
    for q in questions {
        if let Some(label) = q.label {
            push(q.content.clone(), label, SampleOrigin::BarQuestion);
        }
    }
    out
}

fn answer_label(answer: Answer) -> PairLabel {
    match answer {
        Answer::Yes => PairLabel::Positive,
        Answer::No => PairLabel::Negative,
    }
}

/// Trains a unary classifier (empty right side) on lawfulness samples.
pub fn train_lawfulness(samples: &[LawfulnessSample], params: &TrainParams) -> Result<LinearPairScorer, EntailError> {
    let pairs = samples
        .iter()
        .map(|s| TextPair::unary(s.text.clone(), Some(answer_label(s.label))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(train(&pairs, params)?)
}

/// Yes iff the classifier scores `question_text` at 0.5 or above.
pub fn answer_lawfulness(question_text: &str, classifier: &LinearPairScorer) -> Result<Answer, EntailError> {
    if !classifier.is_trained() {
        return Err(EntailError::State("lawfulness classifier has not been trained".into()));
    }
    Ok(if classifier.score_texts(question_text, "") >= 0.5 {
        Answer::Yes
    } else {
        Answer::No
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Entailment,
    Lawfulness,
}

/// One line of `answers.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub answer: Answer,
    pub approach: Approach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabOverlap {
    pub shared: usize,
    pub only_a: usize,
    pub only_b: usize,
}

pub fn vocab_overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> VocabOverlap {
    let shared = a.intersection(b).count();
    VocabOverlap {
        shared,
        only_a: a.len() - shared,
        only_b: b.len() - shared,
    }
}

/// Reads a vocabulary file with one token per line. Blank lines are ignored.
pub fn read_vocab(path: &Path) -> Result<BTreeSet<String>, EntailError> {
    let text = std::fs::read_to_string(path).map_err(|source| EntailError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::TokenizerConfig;
    use crate::pairscore::ExternalScoreTable;

    fn article(id: &str, content: &str) -> StatuteArticle {
        StatuteArticle {
            id: id.into(),
            part: "Part II".into(),
            chapter: String::new(),
            section: String::new(),
            summary_line: String::new(),
            content: content.into(),
        }
    }

    fn code() -> Vec<StatuteArticle> {
        vec![
            article("254", "co owner claim against a specific successor"),
            article("303", "statutory lien holder preferential payment from the property of the obligor"),
            article("17", "assistant consent to the act of the person under assistance"),
            article("709", "damages for intentional or negligent infringement"),
        ]
    }

    fn question(content: &str) -> BarQuestion {
        BarQuestion {
            id: "q1".into(),
            content: content.into(),
            relevant_article_ids: BTreeSet::new(),
            label: None,
        }
    }

    fn model(arts: &[StatuteArticle]) -> TfidfModel {
        let texts: Vec<String> = arts.iter().map(StatuteArticle::retrieval_text).collect();
        TfidfModel::fit(&texts, &TokenizerConfig::default()).unwrap()
    }

    fn ids(pairs: &[EntailmentPair]) -> Vec<&str> {
        pairs.iter().map(|p| p.article_id.as_str()).collect()
    }

    #[test]
    fn gold_first_then_deduplicated_extras() {
        let arts = code();
        let m = model(&arts);
        let q = question("statutory lien holder payment co owner claim");
        let gold = BTreeSet::from(["303".to_string()]);
        let pairs = build_entailment_pairs(&q, &gold, &m, &arts).unwrap();
        assert_eq!(ids(&pairs), vec!["303", "254"]);
        assert_eq!(pairs[0].joined_text, format!("{}{PAIR_SEPARATOR}{}", q.content, arts[1].retrieval_text()));

        let none = build_entailment_pairs(&q, &BTreeSet::new(), &m, &arts).unwrap();
        assert_eq!(none.len(), 2);

        let gold = BTreeSet::from(["17".to_string(), "709".to_string()]);
        assert_eq!(build_entailment_pairs(&q, &gold, &m, &arts).unwrap().len(), 4);

        let bad = BTreeSet::from(["999".to_string()]);
        assert!(matches!(
            build_entailment_pairs(&q, &bad, &m, &arts),
            Err(EntailError::UnknownArticle { .. })
        ));
    }

    #[test]
    fn answer_rule() {
        let arts = code();
        let m = model(&arts);
        let mut pairs = build_entailment_pairs(&question("lien"), &BTreeSet::new(), &m, &arts).unwrap();
        assert!(answer_entailment(&pairs).is_err());
        let mut table = ExternalScoreTable::new(0.0).unwrap();
        classify_pairs(&mut pairs, &table, 0.5);
        assert_eq!(answer_entailment(&pairs).unwrap(), Answer::No);
        table.insert("q1", &pairs[1].article_id.clone(), 0.7).unwrap();
        classify_pairs(&mut pairs, &table, 0.5);
        assert_eq!(answer_entailment(&pairs).unwrap(), Answer::Yes);
        assert!(answer_entailment(&[]).is_err());
    }

    #[test]
    fn negation_rules() {
        let lex = NegationLexicon::default();
        assert_eq!(
            lex.negate("The obligor shall perform.").as_deref(),
            Some("The obligor shall not perform.")
        );
        assert_eq!(
            lex.negate("The obligor shall not perform.").as_deref(),
            Some("The obligor shall perform.")
        );
        assert_eq!(lex.negate("May the court act?").as_deref(), Some("May not the court act?"));
        assert_eq!(lex.negate("A valid contract binds.").as_deref(), Some("A invalid contract binds."));
        assert_eq!(lex.negate("Invalid acts bind nobody.").as_deref(), Some("Valid acts bind nobody."));
        assert_eq!(lex.negate("Damages follow."), None);
    }

    #[test]
    fn augmentation_counts_and_labels() {
        let arts = vec![article("1", "The obligor shall perform. The agent may act.")];
        let mut yes = question("The holder may claim.");
        yes.label = Some(Answer::Yes);
        let mut unlabeled = question("The holder may claim.");
        unlabeled.id = "q2".into();
        let samples = augment_lawfulness(&arts, &[yes, unlabeled], &NegationLexicon::default(), &SentenceSplitter::default());
        assert_eq!(samples.len(), 6);
        assert_eq!(samples[0].origin, SampleOrigin::CivilCodeSentence);
        assert_eq!(samples[1].label, Answer::No);
        assert_eq!(samples[1].text, "The obligor shall not perform.");
        assert_eq!(samples[4].text, "The holder may claim.");
        assert_eq!(samples[4].label, Answer::Yes);
        assert_eq!(samples[5].origin, SampleOrigin::Augmented);
    }

    #[test]
    fn lawfulness_classifier() {
        let untrained = LinearPairScorer::untrained(0, 1 << 10).unwrap();
        assert!(matches!(answer_lawfulness("x", &untrained), Err(EntailError::State(_))));

        let mut arts = Vec::new();
        for i in 0..20 {
            arts.push(article(&i.to_string(), &format!("The holder{i} shall register the claim.")));
        }
        let samples = augment_lawfulness(&arts, &[], &NegationLexicon::default(), &SentenceSplitter::default());
        assert_eq!(samples.len(), 40);

        let zero = train_lawfulness(
            &samples,
            &TrainParams {
                epochs: 0,
                dim: 1 << 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(answer_lawfulness("anything", &zero).unwrap(), Answer::Yes);

        let params = TrainParams {
            epochs: 20,
            lr: 0.5,
            dim: 1 << 12,
            ..Default::default()
        };
        let clf = train_lawfulness(&samples, &params).unwrap();
        assert_eq!(answer_lawfulness("The holder shall register the claim.", &clf).unwrap(), Answer::Yes);
        assert_eq!(answer_lawfulness("The holder shall not register the claim.", &clf).unwrap(), Answer::No);
    }

    #[test]
    fn vocab_overlap_counts() {
        let a: BTreeSet<&str> = ["a", "b", "c"].into();
        let b: BTreeSet<&str> = ["b", "c", "d"].into();
        assert_eq!(
            vocab_overlap(&a, &b),
            VocabOverlap {
                shared: 2,
                only_a: 1,
                only_b: 1
            }
        );
        assert_eq!(vocab_overlap(&a, &a).shared, 3);
    }

    #[test]
    fn vocab_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "lien\r\nholder\n\nlien\n").unwrap();
        assert_eq!(read_vocab(&path).unwrap().len(), 2);
        assert!(read_vocab(&dir.path().join("missing")).is_err());
    }
}
