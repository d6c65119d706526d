//! Set and ranking metrics, run-level aggregation and report rendering.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Answer;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("recall is undefined for an empty gold set")]
    EmptyGold,
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// `(1 + β²)PR / (β²P + R)`, and 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f1: f_beta(precision, recall, 1.0),
            f2: f_beta(precision, recall, 2.0),
        }
    }
}

/// Precision, recall, F1 and F2 of one predicted set. An empty prediction
/// has precision 0.
pub fn set_prf<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Result<Prf, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let hits = predicted.intersection(gold).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        hits / predicted.len() as f64
    };
    Ok(Prf::from_pr(precision, hits / gold.len() as f64))
}

pub fn accuracy(correct: usize, total: usize) -> Result<f64, EvalError> {
    if total == 0 {
        return Err(EvalError::Argument("accuracy needs at least one item".into()));
    }
    if correct > total {
        return Err(EvalError::Argument(format!("{correct} correct out of {total}")));
    }
    Ok(correct as f64 / total as f64)
}

/// Mean over gold items of the precision at the rank where each is found.
/// Gold items missing from `ranked` contribute 0. Repeated ids count at
/// their first position only.
pub fn average_precision<T: Ord + Hash>(ranked: &[T], gold: &BTreeSet<T>) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    let mut rank = 0usize;
    for item in ranked {
        if !seen.insert(item) {
            continue;
        }
        rank += 1;
        if gold.contains(item) {
            hits += 1;
            sum += hits as f64 / rank as f64;
        }
    }
    Ok(sum / gold.len() as f64)
}

pub fn recall_at_k<T: Ord>(ranked: &[T], gold: &BTreeSet<T>, k: usize) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    if k == 0 {
        return Err(EvalError::Argument("k must be at least 1".into()));
    }
    let top: BTreeSet<&T> = ranked.iter().take(k).collect();
    Ok(gold.iter().filter(|g| top.contains(g)).count() as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryJudgment {
    pub query_id: String,
    pub gold: BTreeSet<String>,
    pub predicted: BTreeSet<String>,
    #[serde(default)]
    pub ranked: Option<Vec<String>>,
}

/// Mean average precision over judgments that carry a ranking and gold.
pub fn map(judgments: &[QueryJudgment]) -> Result<f64, EvalError> {
    let aps = judgments
        .iter()
        .filter(|j| !j.gold.is_empty())
        .filter_map(|j| j.ranked.as_ref().map(|r| average_precision(r, &j.gold)))
        .collect::<Result<Vec<_>, _>>()?;
    if aps.is_empty() {
        return Err(EvalError::Argument("no ranked judgments with gold".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean per-query precision and recall, then F of the means.
    Macro,
    /// Pool hits, predictions and gold over queries, then compute once.
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
    pub average_precision: Option<f64>,
    pub r5: Option<f64>,
    pub r10: Option<f64>,
    pub r30: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregation: Averaging,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub map: Option<f64>,
    pub r5: Option<f64>,
    pub r10: Option<f64>,
    pub r30: Option<f64>,
    pub accuracy: Option<f64>,
    /// Queries that entered the averages.
    pub evaluated: usize,
    /// Queries left out because their gold set was empty.
    pub skipped: usize,
    pub per_query: BTreeMap<String, QueryMetrics>,
}

impl MetricsReport {
    fn empty(aggregation: Averaging) -> Self {
        Self {
            aggregation,
            precision: None,
            recall: None,
            f1: None,
            f2: None,
            map: None,
            r5: None,
            r10: None,
            r30: None,
            accuracy: None,
            evaluated: 0,
            skipped: 0,
            per_query: BTreeMap::new(),
        }
    }

    fn columns(&self) -> Vec<(&'static str, f64)> {
        [
            ("Prec", self.precision),
            ("Recall", self.recall),
            ("F1", self.f1),
            ("F2", self.f2),
            ("MAP", self.map),
            ("R5", self.r5),
            ("R10", self.r10),
            ("R30", self.r30),
            ("Accuracy", self.accuracy),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.map(|v| (name, v)))
        .collect()
    }

    /// One-row markdown table of the aggregate metrics, four decimals.
    pub fn to_markdown(&self, title: &str) -> String {
        let cols = self.columns();
        let mut out = String::new();
        let _ = writeln!(out, "| Run | {} |", cols.iter().map(|c| c.0).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(out, "|---|{}", "---:|".repeat(cols.len()));
        let _ = writeln!(
            out,
            "| {title} | {} |",
            cols.iter().map(|c| format!("{:.4}", c.1)).collect::<Vec<_>>().join(" | ")
        );
        let agg = match self.aggregation {
            Averaging::Macro => "macro",
            Averaging::Micro => "micro",
        };
        let _ = writeln!(
            out,
            "\n{} queries evaluated ({agg} average), {} skipped for empty gold.",
            self.evaluated, self.skipped
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics report serializes")
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates per-query set and ranking metrics over a run.
///
/// Queries with empty gold are skipped and counted. Ranking metrics are
/// averaged over the queries that carry a ranking, and stay `None` when
/// none does.
pub fn evaluate_run(judgments: &[QueryJudgment], aggregation: Averaging) -> Result<MetricsReport, EvalError> {
    if judgments.is_empty() {
        return Err(EvalError::Argument("no judgments to evaluate".into()));
    }
    let mut report = MetricsReport::empty(aggregation);
    let (mut hits, mut predicted, mut gold) = (0usize, 0usize, 0usize);
    for j in judgments {
        if j.gold.is_empty() {
            report.skipped += 1;
            continue;
        }
        let prf = set_prf(&j.predicted, &j.gold)?;
        let rank = |k| j.ranked.as_ref().map(|r| recall_at_k(r, &j.gold, k)).transpose();
        let metrics = QueryMetrics {
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            f2: prf.f2,
            average_precision: j.ranked.as_ref().map(|r| average_precision(r, &j.gold)).transpose()?,
            r5: rank(5)?,
            r10: rank(10)?,
            r30: rank(30)?,
        };
        if report.per_query.insert(j.query_id.clone(), metrics).is_some() {
            return Err(EvalError::Argument(format!("duplicate query {:?}", j.query_id)));
        }
        hits += j.predicted.intersection(&j.gold).count();
        predicted += j.predicted.len();
        gold += j.gold.len();
    }
    report.evaluated = report.per_query.len();
    if report.evaluated == 0 {
        return Ok(report);
    }
    let q = || report.per_query.values();
    let (p, r) = match aggregation {
        Averaging::Macro => (
            mean(q().map(|m| m.precision)).unwrap_or(0.0),
            mean(q().map(|m| m.recall)).unwrap_or(0.0),
        ),
        Averaging::Micro => (
            if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 },
            hits as f64 / gold as f64,
        ),
    };
    let prf = Prf::from_pr(p, r);
    let map = mean(q().filter_map(|m| m.average_precision));
    let r5 = mean(q().filter_map(|m| m.r5));
    let r10 = mean(q().filter_map(|m| m.r10));
    let r30 = mean(q().filter_map(|m| m.r30));
    report.precision = Some(prf.precision);
    report.recall = Some(prf.recall);
    report.f1 = Some(prf.f1);
    report.f2 = Some(prf.f2);
    report.map = map;
    report.r5 = r5;
    report.r10 = r10;
    report.r30 = r30;
    Ok(report)
}

/// A predicted yes/no answer next to the gold one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerJudgment {
    pub question_id: String,
    pub predicted: Answer,
    pub gold: Answer,
}

/// Report with only the accuracy filled in.
pub fn evaluate_answers(judgments: &[AnswerJudgment]) -> Result<MetricsReport, EvalError> {
    let correct = judgments.iter().filter(|j| j.predicted == j.gold).count();
    let mut report = MetricsReport::empty(Averaging::Macro);
    report.accuracy = Some(accuracy(correct, judgments.len())?);
    report.evaluated = judgments.len();
    Ok(report)
}
