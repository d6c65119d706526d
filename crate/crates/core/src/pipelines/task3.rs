use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{BarQuestion, StatuteArticle};
use crate::lexical::{RankedUnit, TfidfCorpus, TfidfModel};
use crate::pairscore::{PairRef, PairScorer};

/// Union of member predictions: a candidate is selected when any member selects it.
pub fn ensemble_or<T: Ord + Clone>(predictions: &[BTreeSet<T>]) -> Result<BTreeSet<T>, PipelineError> {
    if predictions.is_empty() {
        return Err(PipelineError::Argument("ensemble needs at least one member".into()));
    }
    Ok(predictions.iter().flatten().cloned().collect())
}

/// Tf-idf ranking over a fixed set of articles, vectorized once.
#[derive(Debug, Clone)]
pub struct ArticleRetriever<'a> {
    model: &'a TfidfModel,
    corpus: TfidfCorpus,
    articles: HashMap<&'a str, &'a StatuteArticle>,
}

impl<'a> ArticleRetriever<'a> {
    pub fn new(model: &'a TfidfModel, articles: &'a [StatuteArticle]) -> Result<Self, PipelineError> {
        if !model.is_fitted() {
            return Err(PipelineError::State("tf-idf model is not fitted".into()));
        }
        let units: Vec<(&str, String)> = articles.iter().map(|a| (a.id.as_str(), a.retrieval_text())).collect();
        Ok(Self {
            model,
            corpus: TfidfCorpus::new(model, &units)?,
            articles: articles.iter().map(|a| (a.id.as_str(), a)).collect(),
        })
    }

    pub fn article(&self, id: &str) -> Option<&'a StatuteArticle> {
        self.articles.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn rank_all(&self, text: &str) -> Vec<RankedUnit> {
        self.corpus.rank_all(self.model, text)
    }

    pub fn top_k(&self, text: &str, k: usize) -> Result<Vec<RankedUnit>, PipelineError> {
        Ok(self.corpus.rank_topk(self.model, text, k)?)
    }

    /// Filters the top `k` articles, lets every classifier vote on each
    /// `(question, article)` pair and returns the OR-union of the votes.
    /// When nobody votes positive the top-1 Tf-idf article is returned.
    pub fn predict(
        &self,
        question: &BarQuestion,
        k: usize,
        classifiers: &[&dyn PairScorer],
        threshold: f64,
    ) -> Result<Task3Prediction, PipelineError> {
        let run = || {
            if classifiers.is_empty() {
                return Err(PipelineError::Argument("at least one classifier is required".into()));
            }
            if self.is_empty() {
                return Err(PipelineError::Argument("no articles to retrieve from".into()));
            }
            let candidates = self.top_k(&question.content, k)?;
            let texts: Vec<String> = candidates
                .iter()
                .map(|c| self.articles[c.id.as_str()].retrieval_text())
                .collect();
            let member_predictions: Vec<BTreeSet<String>> = classifiers
                .iter()
                .map(|clf| {
                    candidates
                        .iter()
                        .zip(&texts)
                        .filter(|(c, text)| {
                            let pair = PairRef {
                                query_id: &question.id,
                                candidate_id: &c.id,
                                left: &question.content,
                                right: text,
                            };
                            clf.score(&pair) >= threshold
                        })
                        .map(|(c, _)| c.id.clone())
                        .collect()
                })
                .collect();
            let mut selected = ensemble_or(&member_predictions)?;
            let fallback = selected.is_empty();
            if fallback {
                selected.insert(candidates[0].id.clone());
            }
            Ok(Task3Prediction {
                question_id: question.id.clone(),
                candidates,
                member_predictions,
                selected,
                fallback,
            })
        };
        run().map_err(|e: PipelineError| e.in_query(&question.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task3Prediction {
    pub question_id: String,
    /// The Tf-idf top-k shared by every ensemble member.
    pub candidates: Vec<RankedUnit>,
    pub member_predictions: Vec<BTreeSet<String>>,
    pub selected: BTreeSet<String>,
    /// True when no member voted positive and the top-1 article was used.
    pub fallback: bool,
}

/// Article retrieval for one bar question. See [`ArticleRetriever::predict`].
pub fn run_task3(
    question: &BarQuestion,
    articles: &[StatuteArticle],
    model: &TfidfModel,
    k: usize,
    classifiers: &[&dyn PairScorer],
    threshold: f64,
) -> Result<Task3Prediction, PipelineError> {
    ArticleRetriever::new(model, articles)?.predict(question, k, classifiers, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// k → fraction of gold (question, article) pairs inside the top k.
    pub recall: BTreeMap<usize, f64>,
    pub gold_pairs: usize,
    /// Questions without gold articles, left out of the recall.
    pub skipped: usize,
}

/// Recall of the Tf-idf filter for each candidate `k`.
pub fn sweep_k(
    questions: &[BarQuestion],
    articles: &[StatuteArticle],
    model: &TfidfModel,
    k_values: &[usize],
) -> Result<SweepReport, PipelineError> {
    if k_values.contains(&0) {
        return Err(PipelineError::Argument("k values must be at least 1".into()));
    }
    let retriever = ArticleRetriever::new(model, articles)?;
    let mut hits: BTreeMap<usize, usize> = k_values.iter().map(|&k| (k, 0)).collect();
    let mut gold_pairs = 0;
    let mut skipped = 0;
    for q in questions {
        if q.relevant_article_ids.is_empty() {
            skipped += 1;
            continue;
        }
        gold_pairs += q.relevant_article_ids.len();
        let ranked = retriever.rank_all(&q.content);
        let rank_of: HashMap<&str, usize> = ranked.iter().enumerate().map(|(r, u)| (u.id.as_str(), r)).collect();
        let gold: HashSet<&str> = q.relevant_article_ids.iter().map(String::as_str).collect();
        for (&k, count) in hits.iter_mut() {
            *count += gold.iter().filter(|g| rank_of.get(*g).is_some_and(|&r| r < k)).count();
        }
    }
    if gold_pairs == 0 {
        return Err(PipelineError::Argument("no labeled questions to sweep over".into()));
    }
    Ok(SweepReport {
        recall: hits
            .into_iter()
            .map(|(k, h)| (k, h as f64 / gold_pairs as f64))
            .collect(),
        gold_pairs,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::TokenizerConfig;
    use crate::pairscore::ExternalScoreTable;

    fn article(id: &str, content: &str) -> StatuteArticle {
        StatuteArticle {
            id: id.into(),
            part: "Part I".into(),
            chapter: String::new(),
            section: String::new(),
            summary_line: String::new(),
            content: content.into(),
        }
    }

    fn articles() -> Vec<StatuteArticle> {
        vec![
            article("17", "assistant consent required for the act"),
            article("117", "unauthorized agent liability to the counterparty"),
            article("254", "co owner claim against other co owners"),
        ]
    }

    fn question(content: &str, gold: &[&str]) -> BarQuestion {
        BarQuestion {
            id: "R01-1-E".into(),
            content: content.into(),
            relevant_article_ids: gold.iter().map(|s| s.to_string()).collect(),
            label: None,
        }
    }

    fn model(arts: &[StatuteArticle]) -> TfidfModel {
        let texts: Vec<String> = arts.iter().map(StatuteArticle::retrieval_text).collect();
        TfidfModel::fit(&texts, &TokenizerConfig::default()).unwrap()
    }

    #[test]
    fn constant_zero_classifier_falls_back_to_top1() {
        let arts = articles();
        let m = model(&arts);
        let never = ExternalScoreTable::new(0.0).unwrap();
        let p = run_task3(&question("the unauthorized agent acted", &[]), &arts, &m, 2, &[&never], 0.5).unwrap();
        assert!(p.fallback);
        assert_eq!(p.selected, BTreeSet::from(["117".to_string()]));
    }

    #[test]
    fn members_are_unioned() {
        let arts = articles();
        let m = model(&arts);
        let q = question("consent of the assistant and agent liability", &[]);
        let mut a = ExternalScoreTable::new(0.0).unwrap();
        a.insert(&q.id, "17", 0.9).unwrap();
        let mut b = ExternalScoreTable::new(0.0).unwrap();
        b.insert(&q.id, "117", 0.6).unwrap();
        let p = run_task3(&q, &arts, &m, 3, &[&a, &b], 0.5).unwrap();
        assert!(!p.fallback);
        assert_eq!(p.selected, BTreeSet::from(["117".to_string(), "17".to_string()]));
    }

    #[test]
    fn state_and_argument_errors() {
        let arts = articles();
        let unfitted = TfidfModel::unfitted(&TokenizerConfig::default());
        let never = ExternalScoreTable::default();
        assert!(matches!(
            run_task3(&question("x", &[]), &arts, &unfitted, 5, &[&never], 0.5),
            Err(PipelineError::State(_))
        ));
        let m = model(&arts);
        assert!(run_task3(&question("x", &[]), &arts, &m, 5, &[], 0.5).is_err());
        assert!(run_task3(&question("x", &[]), &arts, &m, 0, &[&never], 0.5).is_err());
    }

    #[test]
    fn ensemble_or_rules() {
        let a = BTreeSet::from([1]);
        let b = BTreeSet::from([2]);
        assert_eq!(ensemble_or(&[a, b]).unwrap(), BTreeSet::from([1, 2]));
        assert!(ensemble_or(&[BTreeSet::<i32>::new(), BTreeSet::new()]).unwrap().is_empty());
        assert!(ensemble_or::<i32>(&[]).is_err());
    }

    #[test]
    fn sweep_reaches_one_at_full_k_and_skips_unlabeled() {
        let arts = articles();
        let m = model(&arts);
        let qs = vec![
            question("co owner claim", &["254"]),
            question("assistant consent", &["17", "117"]),
            question("no gold here", &[]),
        ];
        let r = sweep_k(&qs, &arts, &m, &[1, 2, 3]).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.gold_pairs, 3);
        assert_eq!(r.recall[&3], 1.0);
        assert!(r.recall[&1] <= r.recall[&2] && r.recall[&2] <= r.recall[&3]);
        assert!((r.recall[&1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
