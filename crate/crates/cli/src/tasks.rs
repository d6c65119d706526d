//! One function per task. Each loads its inputs, runs the library code and
//! returns the files and report to write; nothing here touches the output
//! directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use legalir_core::corpus::{
    compute_corpus_stats, load_civil_code, parse_case_corpus, read_articles_jsonl, read_case_queries_jsonl,
    read_fragments_jsonl, read_jsonl, read_questions_jsonl, resolve_question_articles, write_articles_jsonl,
    write_cases_jsonl, write_jsonl, write_questions_jsonl, Answer, BarQuestion, CaseDocument, CaseQuery, CorpusStats,
    FragmentQuery, StatsConfig, StatuteArticle,
};
use legalir_core::entail::{
    answer_entailment, answer_lawfulness, augment_lawfulness, build_entailment_pairs, classify_pairs, read_vocab,
    train_lawfulness, vocab_overlap, AnswerRecord, Approach, NegationLexicon,
};
use legalir_core::eval::{evaluate_answers, evaluate_run, AnswerJudgment, MetricsReport, QueryJudgment};
use legalir_core::lexical::{InvertedIndex, TfidfModel};
use legalir_core::pairscore::{
    extract_weak_pairs, train_with_history, ExternalScoreTable, LinearPairScorer, PairLabel, PairRef, PairScorer,
    TextPair, TrainParams,
};
use legalir_core::pipelines::{
    run_task1_batch, run_task2, sweep_k, ArticleRetriever, LexicalSource, RetrievalResult, Task3Prediction,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{RunConfig, Task};
use crate::run::TaskOutput;
use crate::synth::generate_synthetic;
use crate::CliError;

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";

pub fn run_task(task: Task, cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    match task {
        Task::Ingest => ingest(cfg),
        Task::Stats => stats(cfg),
        Task::Index => index(cfg),
        Task::ExtractWeak => extract_weak(cfg),
        Task::TrainPair => train_pair(cfg),
        Task::Score => score(cfg),
        Task::Task1 => task1(cfg),
        Task::Task2 => task2(cfg),
        Task::Task3 => task3(cfg),
        Task::Task4Entail => task4(cfg, Approach::Entailment),
        Task::Task4Lawful => task4(cfg, Approach::Lawfulness),
        Task::SweepK => sweep(cfg),
        Task::Eval => eval(cfg),
        Task::GenSynth => gen_synth(cfg),
    }
}

// ---------------------------------------------------------------- loading

fn load_cases(cfg: &RunConfig) -> Result<Vec<CaseDocument>, CliError> {
    Ok(parse_case_corpus(cfg.require("cases")?, cfg.case_format)?)
}

fn load_articles(cfg: &RunConfig) -> Result<Vec<StatuteArticle>, CliError> {
    let articles = match cfg.path("articles") {
        Some(p) => read_articles_jsonl(p)?,
        None => load_civil_code(cfg.require("civil_code")?)?,
    };
    if articles.is_empty() {
        return Err(CliError::Input("the statute corpus has no articles".into()));
    }
    Ok(articles)
}

fn load_questions(path: &Path, articles: &[StatuteArticle]) -> Result<Vec<BarQuestion>, CliError> {
    let questions = read_questions_jsonl(path)?;
    resolve_question_articles(&questions, articles)?;
    Ok(questions)
}

/// Training questions, falling back to the evaluation questions.
fn training_questions(
    cfg: &RunConfig,
    questions: &[BarQuestion],
    articles: &[StatuteArticle],
    out: &mut TaskOutput,
) -> Result<Vec<BarQuestion>, CliError> {
    match cfg.path("train_questions") {
        Some(p) => load_questions(p, articles),
        None => {
            out.warnings.push("train_questions not set; training on the evaluation questions".into());
            Ok(questions.to_vec())
        }
    }
}

fn read_model(path: &Path) -> Result<LinearPairScorer, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    LinearPairScorer::read_from(&mut BufReader::new(file)).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

fn model_bytes(model: &LinearPairScorer) -> Vec<u8> {
    let mut buf = Vec::new();
    model.write_to(&mut buf).expect("in-memory write");
    buf
}

fn read_scores(path: &Path, default: f64) -> Result<ExternalScoreTable, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    Ok(ExternalScoreTable::parse(BufReader::new(file), default)?)
}

fn tfidf_model(cfg: &RunConfig, articles: &[StatuteArticle]) -> Result<TfidfModel, CliError> {
    if let Some(path) = cfg.path("tfidf_model") {
        let file = File::open(path).map_err(CliError::io(path))?;
        return TfidfModel::read_from(&mut BufReader::new(file)).map_err(|source| CliError::Format {
            path: path.to_path_buf(),
            source,
        });
    }
    let texts: Vec<String> = articles.iter().map(StatuteArticle::retrieval_text).collect();
    Ok(TfidfModel::fit(&texts, &cfg.tokenizer)?)
}

fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("in-memory write");
    buf
}

fn train_logged(pairs: &[TextPair], params: &TrainParams) -> Result<(LinearPairScorer, Vec<f64>), CliError> {
    let positives = pairs.iter().filter(|p| p.label == Some(PairLabel::Positive)).count();
    log::info!("training on {} pairs ({positives} positive)", pairs.len());
    let (model, history) = train_with_history(pairs, params)?;
    log::debug!("objective by epoch: {history:?}");
    Ok((model, history))
}

/// The pair scorer for the case pipelines: an external table, a stored
/// model, or a model trained on weak pairs from `cases`.
fn case_scorer(
    cfg: &RunConfig,
    cases: &[CaseDocument],
    report: &mut BTreeMap<&'static str, serde_json::Value>,
) -> Result<Box<dyn PairScorer>, CliError> {
    if let Some(path) = cfg.path("supporting_scores") {
        report.insert("scorer", json!("external"));
        return Ok(Box::new(read_scores(path, cfg.external_default)?));
    }
    if let Some(path) = cfg.path("model") {
        report.insert("scorer", json!("model"));
        return Ok(Box::new(read_model(path)?));
    }
    let pairs = extract_weak_pairs(cases, &cfg.weak_config())?;
    if pairs.is_empty() {
        return Err(CliError::Input("no marker sentences found; cannot train a pair scorer".into()));
    }
    let (model, history) = train_logged(&pairs, &cfg.train_params())?;
    report.insert("scorer", json!("weak-trained"));
    report.insert("weak_pairs", json!(pairs.len()));
    report.insert("training_objective", json!(history));
    Ok(Box::new(model))
}

// ------------------------------------------------------------ rendering

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: String,
    pub selected: Vec<String>,
    pub ranked: Vec<(String, f64)>,
}

impl From<&RetrievalResult> for PredictionRecord {
    fn from(r: &RetrievalResult) -> Self {
        Self {
            query_id: r.query_id.clone(),
            selected: r.selected.iter().cloned().collect(),
            ranked: r.ranked.iter().map(|c| (c.candidate_id.clone(), c.fused_score)).collect(),
        }
    }
}

impl From<&Task3Prediction> for PredictionRecord {
    fn from(p: &Task3Prediction) -> Self {
        Self {
            query_id: p.question_id.clone(),
            selected: p.selected.iter().cloned().collect(),
            ranked: p.candidates.iter().map(|c| (c.id.clone(), c.similarity)).collect(),
        }
    }
}

fn judgment(record: &PredictionRecord, gold: &BTreeSet<String>) -> QueryJudgment {
    QueryJudgment {
        query_id: record.query_id.clone(),
        gold: gold.clone(),
        predicted: record.selected.iter().cloned().collect(),
        ranked: Some(record.ranked.iter().map(|r| r.0.clone()).collect()),
    }
}

/// Metrics when at least one query has gold.
fn metrics(cfg: &RunConfig, judgments: &[QueryJudgment]) -> Result<Option<MetricsReport>, CliError> {
    if judgments.iter().all(|j| j.gold.is_empty()) {
        return Ok(None);
    }
    Ok(Some(evaluate_run(judgments, cfg.averaging)?))
}

fn retrieval_output(
    cfg: &RunConfig,
    title: &str,
    records: &[PredictionRecord],
    gold: &HashMap<String, BTreeSet<String>>,
    mut extra: BTreeMap<&'static str, serde_json::Value>,
) -> Result<TaskOutput, CliError> {
    let mut out = TaskOutput::default();
    out.file(PREDICTIONS_FILE, jsonl(records));
    let empty = BTreeSet::new();
    let judgments: Vec<QueryJudgment> =
        records.iter().map(|r| judgment(r, gold.get(&r.query_id).unwrap_or(&empty))).collect();
    let report = metrics(cfg, &judgments)?;
    extra.insert("queries", json!(records.len()));
    out.markdown = match &report {
        Some(m) => format!("# {title}\n\n{}", m.to_markdown(title)),
        None => format!("# {title}\n\n{} queries, no gold labels to evaluate against.\n", records.len()),
    };
    extra.insert("metrics", serde_json::to_value(&report).expect("metrics serialize"));
    out.report = serde_json::to_value(&extra).expect("report serializes");
    Ok(out)
}

// ---------------------------------------------------------------- tasks

fn ingest(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let mut out = TaskOutput::default();
    let mut counts = BTreeMap::new();
    if cfg.path("cases").is_some() {
        let cases = load_cases(cfg)?;
        let mut buf = Vec::new();
        write_cases_jsonl(&mut buf, &cases).expect("in-memory write");
        out.file("cases.jsonl", buf);
        counts.insert("cases", cases.len());
        counts.insert("paragraphs", cases.iter().map(|c| c.paragraphs.len()).sum());
    }
    let articles = if cfg.path("articles").is_some() || cfg.path("civil_code").is_some() {
        let articles = load_articles(cfg)?;
        let mut buf = Vec::new();
        write_articles_jsonl(&mut buf, &articles).expect("in-memory write");
        out.file("articles.jsonl", buf);
        counts.insert("articles", articles.len());
        Some(articles)
    } else {
        None
    };
    if let Some(path) = cfg.path("questions") {
        let questions = read_questions_jsonl(path)?;
        if let Some(articles) = &articles {
            resolve_question_articles(&questions, articles)?;
        }
        let mut buf = Vec::new();
        write_questions_jsonl(&mut buf, &questions).expect("in-memory write");
        out.file("questions.jsonl", buf);
        counts.insert("questions", questions.len());
    }
    let mut md = String::from("# Ingest\n\n| Corpus | Records |\n|---|---:|\n");
    for (k, v) in &counts {
        let _ = writeln!(md, "| {k} | {v} |");
    }
    out.markdown = md;
    out.report = json!({ "counts": counts });
    Ok(out)
}

fn stats_row(md: &mut String, name: &str, s: &CorpusStats) {
    let gold = s.mean_gold_per_query.map(|g| format!("{g:.2}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        md,
        "| {name} | {} | {:.1} | {:.2} | {} | {} | {} | {gold} |",
        s.sample_count, s.mean_words_per_doc, s.mean_paragraphs_per_doc, s.max_words, s.max_paragraphs, s.candidate_count
    );
}

fn stats(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let sc = StatsConfig {
        bucket_width: cfg.bucket_width,
        tokenizer: cfg.tokenizer.clone(),
    };
    let mut report = BTreeMap::new();
    let mut md = String::from(
        "# Corpus statistics\n\n| Corpus | Samples | Mean words | Mean paragraphs | Max words | Max paragraphs | Candidates | Mean gold |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    if cfg.path("cases").is_some() {
        let cases = load_cases(cfg)?;
        let queries = cfg.path("case_queries").map(read_case_queries_jsonl).transpose()?;
        let s = compute_corpus_stats(&cases, queries.as_deref(), &sc)?;
        stats_row(&mut md, "cases", &s);
        report.insert("cases", serde_json::to_value(&s).expect("stats serialize"));
    }
    let questions = cfg.path("questions").map(read_questions_jsonl).transpose()?;
    if cfg.path("articles").is_some() || cfg.path("civil_code").is_some() {
        let articles = load_articles(cfg)?;
        let s = compute_corpus_stats(&articles, questions.as_deref(), &sc)?;
        stats_row(&mut md, "articles", &s);
        report.insert("articles", serde_json::to_value(&s).expect("stats serialize"));
    }
    if let Some(qs) = &questions {
        let s = compute_corpus_stats::<_, BarQuestion>(qs, Some(qs), &sc)?;
        stats_row(&mut md, "questions", &s);
        report.insert("questions", serde_json::to_value(&s).expect("stats serialize"));
    }
    if let (Some(a), Some(b)) = (cfg.path("vocab_a"), cfg.path("vocab_b")) {
        let o = vocab_overlap(&read_vocab(a)?, &read_vocab(b)?);
        let _ = writeln!(md, "\nVocabulary overlap: {} shared, {} only in A, {} only in B.", o.shared, o.only_a, o.only_b);
        report.insert("vocab_overlap", serde_json::to_value(o).expect("overlap serializes"));
    }
    Ok(TaskOutput {
        markdown: md,
        report: serde_json::to_value(report).expect("report serializes"),
        ..Default::default()
    })
}

fn index(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let mut out = TaskOutput::default();
    let mut counts = BTreeMap::new();
    if cfg.path("cases").is_some() {
        let cases = load_cases(cfg)?;
        let units: Vec<(String, &str)> = cases
            .iter()
            .flat_map(|c| c.paragraphs.iter().map(move |p| (format!("{}#{}", c.id, p.ordinal), p.text.as_str())))
            .collect();
        let idx = InvertedIndex::build(units.iter().map(|(k, t)| (k.as_str(), *t)), &cfg.tokenizer)?;
        let mut buf = Vec::new();
        idx.write_to(&mut buf).expect("in-memory write");
        out.file("cases.lirx", buf);
        counts.insert("paragraph_units", idx.unit_count());
        counts.insert("terms", idx.terms().count());
    }
    if cfg.path("articles").is_some() || cfg.path("civil_code").is_some() {
        let articles = load_articles(cfg)?;
        let model = tfidf_model(cfg, &articles)?;
        let mut buf = Vec::new();
        model.write_to(&mut buf).expect("in-memory write");
        out.file("articles.tfidf", buf);
        counts.insert("articles", articles.len());
        counts.insert("tfidf_vocabulary", model.vocabulary().len());
    }
    let mut md = String::from("# Index\n\n| Item | Count |\n|---|---:|\n");
    for (k, v) in &counts {
        let _ = writeln!(md, "| {k} | {v} |");
    }
    out.markdown = md;
    out.report = json!({ "counts": counts });
    Ok(out)
}

fn label_counts(pairs: &[TextPair]) -> (usize, usize) {
    let pos = pairs.iter().filter(|p| p.label == Some(PairLabel::Positive)).count();
    let neg = pairs.iter().filter(|p| p.label == Some(PairLabel::Negative)).count();
    (pos, neg)
}

fn extract_weak(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let cases = load_cases(cfg)?;
    let pairs = extract_weak_pairs(&cases, &cfg.weak_config())?;
    let (pos, neg) = label_counts(&pairs);
    let mut out = TaskOutput::default();
    out.file("pairs.jsonl", jsonl(&pairs));
    out.markdown = format!("# Weak pairs\n\n{pos} positive and {neg} negative pairs from {} cases.\n", cases.len());
    out.report = json!({ "cases": cases.len(), "positive": pos, "negative": neg });
    Ok(out)
}

/// A pair file line: a [`TextPair`] with optional ids for the score table.
#[derive(Debug, Deserialize)]
struct PairLine {
    #[serde(default)]
    query_id: Option<String>,
    #[serde(default)]
    candidate_id: Option<String>,
    left: String,
    #[serde(default)]
    right: String,
    #[serde(default)]
    label: Option<PairLabel>,
}

fn read_pair_lines(path: &Path) -> Result<Vec<(usize, PairLine)>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    Ok(read_jsonl(BufReader::new(file), &path.display().to_string())?)
}

fn to_text_pairs(lines: &[(usize, PairLine)]) -> Result<Vec<TextPair>, CliError> {
    lines
        .iter()
        .map(|(n, l)| {
            let pair = if l.right.is_empty() {
                TextPair::unary(l.left.clone(), l.label)
            } else {
                TextPair::new(l.left.clone(), l.right.clone(), l.label)
            };
            pair.map_err(|e| CliError::Input(format!("pair line {n}: {e}")))
        })
        .collect()
}

fn train_pair(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let (pairs, source) = match cfg.path("pairs") {
        Some(p) => (to_text_pairs(&read_pair_lines(p)?)?, "pairs"),
        None => (extract_weak_pairs(&load_cases(cfg)?, &cfg.weak_config())?, "weak"),
    };
    let (model, history) = match cfg.path("model") {
        Some(p) => read_model(p)?.continue_training(&pairs, &cfg.train_params())?,
        None => train_logged(&pairs, &cfg.train_params())?,
    };
    let labeled: Vec<&TextPair> = pairs.iter().filter(|p| p.label.is_some()).collect();
    let correct = labeled
        .iter()
        .filter(|p| (model.score_texts(&p.left, &p.right) >= 0.5) == (p.label == Some(PairLabel::Positive)))
        .count();
    let acc = correct as f64 / labeled.len().max(1) as f64;
    let (pos, neg) = label_counts(&pairs);
    let mut out = TaskOutput::default();
    out.file("model.lpsc", model_bytes(&model));
    let mut md = format!(
        "# Pair scorer\n\n{pos} positive and {neg} negative pairs ({source}), training accuracy {acc:.4}.\n\n| Epoch | Objective |\n|---:|---:|\n"
    );
    for (i, v) in history.iter().enumerate() {
        let _ = writeln!(md, "| {} | {v:.6} |", i + 1);
    }
    out.markdown = md;
    out.report = json!({
        "source": source,
        "positive": pos,
        "negative": neg,
        "training_accuracy": acc,
        "objective_by_epoch": history,
        "epochs": model.trained_epochs(),
        "dim": model.dim(),
        "hash_seed": model.hash_seed(),
    });
    Ok(out)
}

fn score(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let lines = read_pair_lines(cfg.require("pairs")?)?;
    let scorer: Box<dyn PairScorer> = match cfg.path("model") {
        Some(p) => Box::new(read_model(p)?),
        None => Box::new(read_scores(cfg.require("supporting_scores")?, cfg.external_default)?),
    };
    let mut table = ExternalScoreTable::new(0.0)?;
    let (mut labeled, mut correct) = (0usize, 0usize);
    for (n, l) in &lines {
        let qid = l.query_id.clone().unwrap_or_else(|| format!("line{n}"));
        let cid = l.candidate_id.clone().unwrap_or_else(|| "0".into());
        let s = scorer.score(&PairRef {
            query_id: &qid,
            candidate_id: &cid,
            left: &l.left,
            right: &l.right,
        });
        table
            .insert(&qid, &cid, s)
            .map_err(|e| CliError::Input(format!("pair line {n}: {e}")))?;
        if let Some(label) = l.label {
            labeled += 1;
            correct += usize::from((s >= cfg.classifier_threshold) == (label == PairLabel::Positive));
        }
    }
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).expect("in-memory write");
    let mut out = TaskOutput::default();
    out.file("scores.tsv", buf);
    let acc = (labeled > 0).then(|| correct as f64 / labeled as f64);
    out.markdown = format!(
        "# Scores\n\n{} pairs scored.{}\n",
        lines.len(),
        acc.map(|a| format!(" Accuracy on {labeled} labeled pairs: {a:.4}.")).unwrap_or_default()
    );
    out.report = json!({ "pairs": lines.len(), "labeled": labeled, "accuracy": acc });
    Ok(out)
}

fn task1(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let cases = load_cases(cfg)?;
    let queries: Vec<CaseQuery> = read_case_queries_jsonl(cfg.require("case_queries")?)?;
    let by_id: HashMap<&str, &CaseDocument> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| CliError::Input(format!("case {id:?} is not in the case corpus")))
    };
    let batch = queries
        .iter()
        .map(|q| {
            let cands = q.candidates.iter().map(|c| lookup(c)).collect::<Result<Vec<_>, _>>()?;
            Ok((lookup(&q.query_id)?, cands))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut extra = BTreeMap::new();
    let scorer = case_scorer(cfg, &cases, &mut extra)?;
    let results = run_task1_batch(&batch, scorer.as_ref(), &cfg.bm25, &cfg.tokenizer, &cfg.fusion)?;
    let defaulted: usize = results.iter().map(|r| r.warnings).sum();
    let records: Vec<PredictionRecord> = results.iter().map(PredictionRecord::from).collect();
    let gold = queries.iter().map(|q| (q.query_id.clone(), q.gold.clone())).collect();
    extra.insert("defaulted_scores", json!(defaulted));
    let mut out = retrieval_output(cfg, "Case retrieval", &records, &gold, extra)?;
    if defaulted > 0 {
        out.warnings.push(format!("{defaulted} candidates scored with the external default"));
    }
    Ok(out)
}

/// Positive (fragment, gold paragraph) and negative (fragment, other
/// paragraph) pairs for continued training.
fn fragment_pairs(fragments: &[FragmentQuery], by_id: &HashMap<&str, &CaseDocument>) -> Result<Vec<TextPair>, CliError> {
    let mut pairs = Vec::new();
    for f in fragments.iter().filter(|f| !f.gold.is_empty()) {
        let case = by_id
            .get(f.case_id.as_str())
            .ok_or_else(|| CliError::Input(format!("fragment {:?} names unknown case {:?}", f.query_id, f.case_id)))?;
        for p in &case.paragraphs {
            let label = if f.gold.contains(&p.ordinal.to_string()) {
                PairLabel::Positive
            } else {
                PairLabel::Negative
            };
            pairs.push(TextPair::new(f.fragment.clone(), p.text.clone(), Some(label))?);
        }
    }
    Ok(pairs)
}

fn task2(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let cases = load_cases(cfg)?;
    let fragments = read_fragments_jsonl(cfg.require("fragments")?)?;
    let by_id: HashMap<&str, &CaseDocument> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut extra = BTreeMap::new();
    extra.insert("setting", json!(cfg.task2_setting));
    let mut warnings = Vec::new();
    let mut scorer = case_scorer(cfg, &cases, &mut extra)?;
    if cfg.task2_setting == 2 {
        let base = match cfg.path("model") {
            Some(p) => read_model(p)?,
            None => {
                let pairs = extract_weak_pairs(&cases, &cfg.weak_config())?;
                train_logged(&pairs, &cfg.train_params())?.0
            }
        };
        let train_fragments = match cfg.path("train_fragments") {
            Some(p) => read_fragments_jsonl(p)?,
            None => {
                warnings.push("train_fragments not set; continuing training on the evaluation fragments".into());
                fragments.clone()
            }
        };
        let pairs = fragment_pairs(&train_fragments, &by_id)?;
        if pairs.is_empty() {
            return Err(CliError::Input("setting 2 needs fragments with gold paragraphs".into()));
        }
        let (tuned, history) = base.continue_training(&pairs, &cfg.train_params())?;
        extra.insert("scorer", json!("continued"));
        extra.insert("continued_pairs", json!(pairs.len()));
        extra.insert("continued_objective", json!(history));
        scorer = Box::new(tuned);
    }
    let table;
    let lexical = if cfg.task2_setting == 3 {
        table = read_scores(cfg.require("lexical_scores")?, cfg.external_default)?;
        LexicalSource::External(&table)
    } else {
        LexicalSource::Bm25 {
            params: cfg.bm25,
            tokenizer: cfg.tokenizer.clone(),
        }
    };
    let mut records = Vec::with_capacity(fragments.len());
    let mut defaulted = 0;
    for f in &fragments {
        let case = by_id
            .get(f.case_id.as_str())
            .ok_or_else(|| CliError::Input(format!("fragment {:?} names unknown case {:?}", f.query_id, f.case_id)))?;
        let cands: Vec<(String, &str)> = case.paragraphs.iter().map(|p| (p.ordinal.to_string(), p.text.as_str())).collect();
        let r = run_task2(&f.query_id, &f.fragment, &cands, scorer.as_ref(), &lexical, &cfg.fusion)?;
        defaulted += r.warnings;
        records.push(PredictionRecord::from(&r));
    }
    if defaulted > 0 {
        warnings.push(format!("{defaulted} paragraphs scored with the external default"));
    }
    extra.insert("defaulted_scores", json!(defaulted));
    let gold = fragments.iter().map(|f| (f.query_id.clone(), f.gold.clone())).collect();
    let mut out = retrieval_output(cfg, "Paragraph entailment", &records, &gold, extra)?;
    out.warnings.extend(warnings);
    Ok(out)
}

/// (question, article) training pairs: gold articles are positive, the best
/// non-gold Tf-idf candidates are negative.
fn article_pairs(
    cfg: &RunConfig,
    questions: &[BarQuestion],
    retriever: &ArticleRetriever<'_>,
) -> Result<Vec<TextPair>, CliError> {
    let mut pairs = Vec::new();
    for q in questions.iter().filter(|q| !q.relevant_article_ids.is_empty()) {
        for id in &q.relevant_article_ids {
            let a = retriever.article(id).expect("articles resolved");
            pairs.push(TextPair::new(q.content.clone(), a.retrieval_text(), Some(PairLabel::Positive))?);
        }
        let want = cfg.weak.negatives_per_positive * q.relevant_article_ids.len();
        let negatives = retriever
            .top_k(&q.content, cfg.k)?
            .into_iter()
            .filter(|u| !q.relevant_article_ids.contains(&u.id))
            .take(want);
        for u in negatives {
            let a = retriever.article(&u.id).expect("ranked ids exist");
            pairs.push(TextPair::new(q.content.clone(), a.retrieval_text(), Some(PairLabel::Negative))?);
        }
    }
    Ok(pairs)
}

fn task3(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let articles = load_articles(cfg)?;
    let questions = load_questions(cfg.require("questions")?, &articles)?;
    let model = tfidf_model(cfg, &articles)?;
    let retriever = ArticleRetriever::new(&model, &articles)?;
    let mut out = TaskOutput::default();
    let mut extra = BTreeMap::new();

    let mut members: Vec<Box<dyn PairScorer>> = Vec::new();
    for path in cfg.path("model").into_iter().chain(cfg.ensemble_models.iter().map(|p| p.as_path())) {
        members.push(Box::new(read_model(path)?));
    }
    if let Some(path) = cfg.path("supporting_scores") {
        members.push(Box::new(read_scores(path, cfg.external_default)?));
    }
    if members.is_empty() {
        let train_qs = training_questions(cfg, &questions, &articles, &mut out)?;
        let pairs = article_pairs(cfg, &train_qs, &retriever)?;
        if pairs.is_empty() {
            return Err(CliError::Input("no labeled questions to train the article classifiers on".into()));
        }
        for i in 0..cfg.ensemble_size as u64 {
            let params = TrainParams {
                seed: cfg.seed.wrapping_add(i),
                hash_seed: cfg.train.hash_seed.wrapping_add(i),
                ..cfg.train.clone()
            };
            members.push(Box::new(train_logged(&pairs, &params)?.0));
        }
        extra.insert("training_pairs", json!(pairs.len()));
    }
    extra.insert("ensemble_members", json!(members.len()));
    let refs: Vec<&dyn PairScorer> = members.iter().map(|m| m.as_ref()).collect();
    let predictions = questions
        .iter()
        .map(|q| retriever.predict(q, cfg.k, &refs, cfg.classifier_threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let fallbacks = predictions.iter().filter(|p| p.fallback).count();
    extra.insert("fallbacks", json!(fallbacks));
    extra.insert("k", json!(cfg.k));
    let records: Vec<PredictionRecord> = predictions.iter().map(PredictionRecord::from).collect();
    let gold = questions.iter().map(|q| (q.id.clone(), q.relevant_article_ids.clone())).collect();
    let mut result = retrieval_output(cfg, "Statute retrieval", &records, &gold, extra)?;
    result.warnings.extend(out.warnings);
    Ok(result)
}

fn answer_judgments(records: &[AnswerRecord], questions: &[BarQuestion]) -> Vec<AnswerJudgment> {
    records
        .iter()
        .zip(questions)
        .filter_map(|(r, q)| {
            q.label.map(|gold| AnswerJudgment {
                question_id: r.question_id.clone(),
                predicted: r.answer,
                gold,
            })
        })
        .collect()
}

fn task4(cfg: &RunConfig, approach: Approach) -> Result<TaskOutput, CliError> {
    let articles = load_articles(cfg)?;
    let questions = load_questions(cfg.require("questions")?, &articles)?;
    let mut out = TaskOutput::default();
    let mut extra = BTreeMap::new();
    let records: Vec<AnswerRecord> = match approach {
        Approach::Entailment => {
            let model = tfidf_model(cfg, &articles)?;
            let classifier = match cfg.path("model") {
                Some(p) => read_model(p)?,
                None => {
                    let train_qs = training_questions(cfg, &questions, &articles, &mut out)?;
                    let by_id: HashMap<&str, &StatuteArticle> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
                    let mut pairs = Vec::new();
                    for q in &train_qs {
                        let Some(label) = q.label else { continue };
                        for id in &q.relevant_article_ids {
                            let pl = if label == Answer::Yes { PairLabel::Positive } else { PairLabel::Negative };
                            pairs.push(TextPair::new(q.content.clone(), by_id[id.as_str()].retrieval_text(), Some(pl))?);
                        }
                    }
                    if pairs.is_empty() {
                        return Err(CliError::Input("no labeled questions with gold articles to train on".into()));
                    }
                    extra.insert("training_pairs", json!(pairs.len()));
                    train_logged(&pairs, &cfg.train_params())?.0
                }
            };
            let mut pair_dump = Vec::new();
            let mut records = Vec::with_capacity(questions.len());
            for q in &questions {
                let mut pairs = build_entailment_pairs(q, &q.relevant_article_ids, &model, &articles)?;
                classify_pairs(&mut pairs, &classifier, cfg.classifier_threshold);
                records.push(AnswerRecord {
                    question_id: q.id.clone(),
                    answer: answer_entailment(&pairs)?,
                    approach,
                });
                pair_dump.extend(pairs);
            }
            out.file("entailment_pairs.jsonl", jsonl(&pair_dump));
            records
        }
        Approach::Lawfulness => {
            let classifier = match cfg.path("lawfulness_model") {
                Some(p) => read_model(p)?,
                None => {
                    let train_qs = training_questions(cfg, &questions, &articles, &mut out)?;
                    let samples = augment_lawfulness(&articles, &train_qs, &NegationLexicon::default(), &Default::default());
                    extra.insert("training_samples", json!(samples.len()));
                    let model = train_lawfulness(&samples, &cfg.train_params())?;
                    out.file("lawfulness.lpsc", model_bytes(&model));
                    model
                }
            };
            questions
                .iter()
                .map(|q| {
                    Ok(AnswerRecord {
                        question_id: q.id.clone(),
                        answer: answer_lawfulness(&q.content, &classifier)?,
                        approach,
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
    };
    out.file(ANSWERS_FILE, jsonl(&records));
    let judgments = answer_judgments(&records, &questions);
    let metrics = if judgments.is_empty() { None } else { Some(evaluate_answers(&judgments)?) };
    let title = match approach {
        Approach::Entailment => "Entailment answers",
        Approach::Lawfulness => "Lawfulness answers",
    };
    out.markdown = match &metrics {
        Some(m) => format!("# {title}\n\n{}", m.to_markdown(title)),
        None => format!("# {title}\n\n{} questions answered, none labeled.\n", records.len()),
    };
    extra.insert("questions", json!(records.len()));
    extra.insert("yes", json!(records.iter().filter(|r| r.answer == Answer::Yes).count()));
    extra.insert("metrics", serde_json::to_value(&metrics).expect("metrics serialize"));
    out.report = serde_json::to_value(extra).expect("report serializes");
    Ok(out)
}

fn sweep(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let articles = load_articles(cfg)?;
    let questions = load_questions(cfg.require("questions")?, &articles)?;
    let model = tfidf_model(cfg, &articles)?;
    let report = sweep_k(&questions, &articles, &model, &cfg.k_values)?;
    let mut md = String::from("# Candidate recall by k\n\n| k | Recall |\n|---:|---:|\n");
    for (k, r) in &report.recall {
        let _ = writeln!(md, "| {k} | {r:.4} |");
    }
    let _ = writeln!(
        md,
        "\n{} gold pairs over {} articles, {} unlabeled questions skipped.",
        report.gold_pairs,
        articles.len(),
        report.skipped
    );
    Ok(TaskOutput {
        markdown: md,
        report: serde_json::to_value(&report).expect("sweep serializes"),
        ..Default::default()
    })
}

/// Gold labels read loosely from case queries, fragments or questions.
#[derive(Debug, Deserialize)]
struct GoldLine {
    #[serde(default)]
    query_id: Option<String>,
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    gold: Option<BTreeSet<String>>,
    #[serde(default)]
    relevant_article_ids: Option<BTreeSet<String>>,
    #[serde(default)]
    label: Option<Answer>,
}

#[derive(Debug, Deserialize)]
struct PredictionLine {
    #[serde(default)]
    query_id: Option<String>,
    #[serde(default)]
    question_id: Option<String>,
    #[serde(default)]
    selected: Vec<String>,
    #[serde(default)]
    ranked: Vec<(String, f64)>,
    #[serde(default)]
    answer: Option<Answer>,
}

fn eval(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let pred_path = cfg.require("predictions")?;
    let gold_path = cfg.require("gold")?;
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(CliError::io(p));
    let preds: Vec<(usize, PredictionLine)> = read_jsonl(open(pred_path)?, &pred_path.display().to_string())?;
    let golds: Vec<(usize, GoldLine)> = read_jsonl(open(gold_path)?, &gold_path.display().to_string())?;
    let mut gold_sets = HashMap::new();
    let mut labels = HashMap::new();
    for (n, g) in golds {
        let id = g
            .query_id
            .or(g.id)
            .ok_or_else(|| CliError::Input(format!("gold line {n} has no query_id or id")))?;
        if let Some(label) = g.label {
            labels.insert(id.clone(), label);
        }
        gold_sets.insert(id, g.gold.or(g.relevant_article_ids).unwrap_or_default());
    }
    let answers = preds.iter().any(|(_, p)| p.answer.is_some());
    let mut out = TaskOutput::default();
    let metrics = if answers {
        let mut judgments = Vec::new();
        for (n, p) in &preds {
            let id = p.question_id.clone().or(p.query_id.clone()).unwrap_or_default();
            let predicted = p.answer.ok_or_else(|| CliError::Input(format!("prediction line {n} has no answer")))?;
            match labels.get(&id) {
                Some(&gold) => judgments.push(AnswerJudgment { question_id: id, predicted, gold }),
                None => out.warnings.push(format!("no gold answer for {id:?}")),
            }
        }
        evaluate_answers(&judgments)?
    } else {
        let mut judgments = Vec::new();
        for (n, p) in &preds {
            let id = p
                .query_id
                .clone()
                .or(p.question_id.clone())
                .ok_or_else(|| CliError::Input(format!("prediction line {n} has no query_id")))?;
            let gold = gold_sets.get(&id).cloned().unwrap_or_else(|| {
                out.warnings.push(format!("no gold for {id:?}"));
                BTreeSet::new()
            });
            judgments.push(QueryJudgment {
                query_id: id,
                gold,
                predicted: p.selected.iter().cloned().collect(),
                ranked: (!p.ranked.is_empty()).then(|| p.ranked.iter().map(|r| r.0.clone()).collect()),
            });
        }
        evaluate_run(&judgments, cfg.averaging)?
    };
    out.markdown = format!("# Evaluation\n\n{}", metrics.to_markdown("predictions"));
    out.report = json!({ "metrics": metrics });
    Ok(out)
}

fn gen_synth(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let corpus = generate_synthetic(&cfg.synth_spec())?;
    let mut out = TaskOutput::default();
    for (name, bytes) in corpus.files() {
        out.file(name, bytes);
    }
    let l = &corpus.ledger;
    out.markdown = format!(
        "# Synthetic corpus\n\n| Item | Count |\n|---|---:|\n| cases | {} |\n| planted supports | {} |\n| fragments | {} |\n| articles | {} |\n| questions | {} |\n",
        corpus.cases.len(),
        l.support_pairs.len(),
        corpus.fragments.len(),
        corpus.articles.len(),
        corpus.questions.len()
    );
    out.report = json!({
        "cases": corpus.cases.len(),
        "planted_supports": l.support_pairs.len(),
        "near_misses": l.near_miss_pairs.len(),
        "fragments": corpus.fragments.len(),
        "articles": corpus.articles.len(),
        "questions": corpus.questions.len(),
        "question_article_pairs": l.question_article_pairs,
        "yes_questions": l.yes_questions,
    });
    Ok(out)
}
