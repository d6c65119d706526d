use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn legalir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legalir"))
        .args(args)
        .env_remove("LEGALIR_LOG")
        .output()
        .expect("binary runs")
}

fn stderr_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stderr).lines().map(str::to_string).collect()
}

/// The last stderr line, which must be the machine-readable error.
fn error_line(out: &Output) -> Value {
    let lines = stderr_lines(out);
    let last = lines.last().expect("an error line on stderr");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not JSON ({e}): {last}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    let out = legalir(&[
        "gen-synth",
        "--out",
        p(&corpus),
        "--seed",
        "3",
        "--set",
        "n_cases=20",
        "--set",
        "planted_support_rate=0.15",
        "--set",
        "n_articles=40",
        "--set",
        "n_questions=10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    corpus
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn assert_valid(schema: &Value, instance: &Value, what: &str) {
    let validator = jsonschema::validator_for(schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

fn prediction_schema() -> Value {
    json!({
        "type": "object",
        "required": ["query_id", "selected", "ranked"],
        "properties": {
            "query_id": {"type": "string", "minLength": 1},
            "selected": {"type": "array", "items": {"type": "string"}, "uniqueItems": true},
            "ranked": {
                "type": "array",
                "items": {
                    "type": "array",
                    "prefixItems": [{"type": "string"}, {"type": "number"}],
                    "minItems": 2,
                    "maxItems": 2
                }
            }
        }
    })
}

fn report_schema() -> Value {
    let unit = json!({"type": "number", "minimum": 0, "maximum": 1});
    json!({
        "type": "object",
        "required": ["metrics"],
        "properties": {
            "metrics": {
                "type": "object",
                "required": ["precision", "recall", "f1", "f2", "map", "r5", "r10", "r30", "evaluated", "per_query"],
                "properties": {
                    "precision": unit, "recall": unit, "f1": unit, "f2": unit, "map": unit,
                    "r5": unit, "r10": unit, "r30": unit,
                    "evaluated": {"type": "integer", "minimum": 1},
                    "per_query": {"type": "object", "additionalProperties": {"type": "object"}}
                }
            }
        }
    })
}

fn manifest_schema() -> Value {
    let hash = json!({"type": "string", "pattern": "^[0-9a-f]{64}$"});
    json!({
        "type": "object",
        "required": ["tool", "version", "task", "seed", "config_hash", "config", "inputs", "outputs", "warnings"],
        "properties": {
            "tool": {"const": "legalir"},
            "version": {"type": "string"},
            "task": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "config_hash": hash,
            "config": {"type": "object", "additionalProperties": {"type": "string"}},
            "inputs": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "required": ["path", "sha256"],
                    "properties": {"path": {"type": "string"}, "sha256": hash}
                }
            },
            "outputs": {"type": "object", "additionalProperties": hash},
            "warnings": {"type": "array", "items": {"type": "string"}}
        }
    })
}

#[test]
fn task1_artifacts_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out_dir = dir.path().join("run");
    let out = legalir(&[
        "run-task1",
        "--set",
        &format!("cases={}", p(&corpus.join("cases.jsonl"))),
        "--set",
        &format!("case_queries={}", p(&corpus.join("case_queries.jsonl"))),
        "--alpha",
        "0.85",
        "--top-n",
        "10",
        "--seed",
        "11",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let predictions = fs::read_to_string(out_dir.join("predictions.jsonl")).unwrap();
    let schema = prediction_schema();
    let lines: Vec<&str> = predictions.lines().collect();
    assert_eq!(lines.len(), 20);
    for line in &lines {
        assert_valid(&schema, &serde_json::from_str(line).unwrap(), "prediction line");
    }
    assert_valid(&report_schema(), &read_json(&out_dir.join("report.json")), "report.json");
    assert!(fs::read_to_string(out_dir.join("report.md")).unwrap().contains("| Case retrieval |"));

    let manifest = read_json(&out_dir.join("run_manifest.json"));
    assert_valid(&manifest_schema(), &manifest, "run_manifest.json");
    assert_eq!(manifest["task"], "task1");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["alpha"], "0.85");
    assert_eq!(manifest["config"]["top_n"], "10");
    let cases_bytes = fs::read(corpus.join("cases.jsonl")).unwrap();
    assert_eq!(manifest["inputs"]["cases"]["sha256"], sha256_hex(&cases_bytes));
    let outputs = manifest["outputs"].as_object().unwrap();
    for name in ["predictions.jsonl", "report.json", "report.md", "resolved_config.txt"] {
        let bytes = fs::read(out_dir.join(name)).unwrap();
        assert_eq!(outputs[name], sha256_hex(&bytes), "{name}");
    }
}

#[test]
fn manifest_config_alone_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let first = dir.path().join("first");
    let out = legalir(&[
        "run-task1",
        "--set",
        &format!("cases={}", p(&corpus.join("cases.jsonl"))),
        "--set",
        &format!("case_queries={}", p(&corpus.join("case_queries.jsonl"))),
        "--set",
        "aggregation=mean_top_m",
        "--set",
        "mean_top_m=2",
        "--out",
        p(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = read_json(&first.join("run_manifest.json"));
    let text: String = manifest["config"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(k, _)| k.as_str() != "output_dir")
        .map(|(k, v)| format!("{k}={}\n", v.as_str().unwrap()))
        .collect();
    let cfg = dir.path().join("from_manifest.cfg");
    fs::write(&cfg, text).unwrap();
    let second = dir.path().join("second");
    let out = legalir(&["run-task1", "--config", p(&cfg), "--out", p(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        fs::read(first.join("predictions.jsonl")).unwrap(),
        fs::read(second.join("predictions.jsonl")).unwrap()
    );
    assert_eq!(read_json(&second.join("run_manifest.json"))["config_hash"], manifest["config_hash"]);
}

#[test]
fn out_of_range_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "alpha=1.5\n").unwrap();
    let out = legalir(&["run-task1", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("alpha"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_required_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = legalir(&["run-task1", "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("cases"), "{err}");
}

#[test]
fn missing_input_file_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = legalir(&[
        "run-task1",
        "--set",
        &format!("cases={}", p(&dir.path().join("nope.jsonl"))),
        "--set",
        &format!("case_queries={}", p(&dir.path().join("nope2.jsonl"))),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("does not exist"));
}

#[test]
fn unknown_keys_fail_strict_and_warn_lax() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("extra.cfg");
    fs::write(&cfg, "alpah=0.5\n").unwrap();
    let strict = legalir(&["gen-synth", "--config", p(&cfg), "--out", p(&dir.path().join("s"))]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(error_line(&strict)["message"].as_str().unwrap().contains("alpah"));

    let lax_dir = dir.path().join("l");
    let lax = legalir(&["gen-synth", "--lax", "--config", p(&cfg), "--out", p(&lax_dir)]);
    assert!(lax.status.success(), "{}", String::from_utf8_lossy(&lax.stderr));
    let warnings = read_json(&lax_dir.join("run_manifest.json"))["warnings"].clone();
    assert!(warnings.as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("alpah")), "{warnings}");
}

#[test]
fn empty_config_echoes_every_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "").unwrap();
    let out_dir = dir.path().join("o");
    let out = legalir(&["gen-synth", "--config", p(&cfg), "--out", p(&out_dir), "--set", "n_cases=5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = read_json(&out_dir.join("run_manifest.json"))["config"].clone();
    for (key, value) in [
        ("alpha", "0.85"),
        ("top_n", "25"),
        ("k1", "1.2"),
        ("b", "0.75"),
        ("normalization", "minmax_per_query"),
        ("aggregation", "max"),
        ("seed", "0"),
        ("epochs", "5"),
        ("lr", "0.1"),
        ("negatives_per_positive", "3"),
    ] {
        assert_eq!(config[key], value, "{key}");
    }
    let resolved = fs::read_to_string(out_dir.join("resolved_config.txt")).unwrap();
    assert!(resolved.lines().any(|l| l == "top_n=25"));
}

#[test]
fn usage_errors_exit_two_with_json() {
    let out = legalir(&["run-task1", "--alpha", "much"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");
    let help = legalir(&["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("run-task1"));
}

// Two documents whose words contain no punctuation, so a whitespace split
// counts exactly what the tokenizer counts.
#[test]
fn stats_on_two_documents() {
    let dir = tempfile::tempdir().unwrap();
    let docs = [
        ("d1", vec!["alpha beta gamma", "delta epsilon"]),
        ("d2", vec!["one two three four five six seven", "eight", "nine ten"]),
    ];
    let jsonl: String = docs
        .iter()
        .map(|(id, paras)| format!("{}\n", json!({"id": id, "paragraphs": paras})))
        .collect();
    let cases = dir.path().join("cases.jsonl");
    fs::write(&cases, jsonl).unwrap();
    let out_dir = dir.path().join("o");
    let out = legalir(&["stats", "--set", &format!("cases={}", p(&cases)), "--out", p(&out_dir), "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let words: Vec<usize> = docs
        .iter()
        .map(|(_, paras)| paras.iter().map(|t| t.split_whitespace().count()).sum())
        .collect();
    let paras: Vec<usize> = docs.iter().map(|(_, paras)| paras.len()).collect();
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(stdout, report);
    let s = &report["cases"];
    assert_eq!(s["sample_count"], 2);
    assert_eq!(s["max_words"], *words.iter().max().unwrap());
    assert_eq!(s["max_paragraphs"], *paras.iter().max().unwrap());
    let mean_words = words.iter().sum::<usize>() as f64 / 2.0;
    let mean_paras = paras.iter().sum::<usize>() as f64 / 2.0;
    assert!((s["mean_words_per_doc"].as_f64().unwrap() - mean_words).abs() < 1e-12);
    assert!((s["mean_paragraphs_per_doc"].as_f64().unwrap() - mean_paras).abs() < 1e-12);
}

#[test]
fn sweep_k_prints_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out_dir = dir.path().join("o");
    let out = legalir(&[
        "sweep-k",
        "--set",
        &format!("articles={}", p(&corpus.join("articles.jsonl"))),
        "--set",
        &format!("questions={}", p(&corpus.join("questions.jsonl"))),
        "--set",
        "k_values=10,50,150",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = md
        .lines()
        .filter(|l| l.starts_with("| ") && l.split('|').nth(1).is_some_and(|c| c.trim().parse::<usize>().is_ok()))
        .collect();
    assert_eq!(rows.len(), 3, "{md}");
    let recall = read_json(&out_dir.join("report.json"))["recall"].clone();
    let values: Vec<f64> = ["10", "50", "150"].iter().map(|k| recall[k].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_legalir"))
        .args(["gen-synth", "--set", "n_cases=3", "--out", p(&dir.path().join("o"))])
        .env("LEGALIR_LOG", "info")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("running gen-synth"));
}

#[test]
fn remaining_tasks_run_on_a_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let c = |name: &str| p(&corpus.join(name)).to_string();
    let runs: Vec<(&str, Vec<String>, &str)> = vec![
        ("run-task2", vec![format!("cases={}", c("cases.jsonl")), format!("fragments={}", c("fragments.jsonl"))], "predictions.jsonl"),
        ("run-task3", vec![format!("articles={}", c("articles.jsonl")), format!("questions={}", c("questions.jsonl"))], "predictions.jsonl"),
        ("run-task4", vec![format!("articles={}", c("articles.jsonl")), format!("questions={}", c("questions.jsonl"))], "answers.jsonl"),
        ("ingest", vec![format!("civil_code={}", c("civil_code.txt"))], "articles.jsonl"),
        ("index", vec![format!("cases={}", c("cases.jsonl"))], "cases.lirx"),
        ("extract-weak", vec![format!("cases={}", c("cases.jsonl"))], "pairs.jsonl"),
        ("train-pair", vec![format!("cases={}", c("cases.jsonl"))], "model.lpsc"),
    ];
    for (sub, sets, artifact) in runs {
        let out_dir = dir.path().join(sub);
        let mut args = vec![sub.to_string(), "--out".into(), p(&out_dir).to_string()];
        for s in sets {
            args.push("--set".into());
            args.push(s);
        }
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = legalir(&argv);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join(artifact).is_file(), "{sub} wrote no {artifact}");
        assert!(out_dir.join("run_manifest.json").is_file());
    }

    // Evaluate the task 3 predictions against the question gold.
    let out_dir = dir.path().join("eval");
    let out = legalir(&[
        "eval",
        "--set",
        &format!("predictions={}", p(&dir.path().join("run-task3").join("predictions.jsonl"))),
        "--set",
        &format!("gold={}", c("questions.jsonl")),
        "--out",
        p(&out_dir),
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let from_eval = read_json(&out_dir.join("report.json"));
    let from_run = read_json(&dir.path().join("run-task3").join("report.json"));
    assert_eq!(from_eval["metrics"]["f2"], from_run["metrics"]["f2"]);
}
