//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment line. Every key has a default
//! except the input paths. [`RunConfig::entries`] renders the fully resolved
//! configuration back into the same format, which is what the manifest
//! records and what the config hash is computed over.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use legalir_core::corpus::CaseFormat;
use legalir_core::entail::Approach;
use legalir_core::eval::Averaging;
use legalir_core::fingerprint;
use legalir_core::lexical::{english_stopwords, Bm25Params, TokenizerConfig};
use legalir_core::pairscore::{TrainParams, WeakLabelConfig};
use legalir_core::pipelines::{Aggregation, FusionConfig, Normalization, Selection};

use crate::synth::SyntheticSpec;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Ingest,
    Stats,
    Index,
    TrainPair,
    ExtractWeak,
    Score,
    Task1,
    Task2,
    Task3,
    Task4Entail,
    Task4Lawful,
    SweepK,
    Eval,
    GenSynth,
}

impl Task {
    pub const ALL: [Task; 14] = [
        Task::Ingest,
        Task::Stats,
        Task::Index,
        Task::TrainPair,
        Task::ExtractWeak,
        Task::Score,
        Task::Task1,
        Task::Task2,
        Task::Task3,
        Task::Task4Entail,
        Task::Task4Lawful,
        Task::SweepK,
        Task::Eval,
        Task::GenSynth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Ingest => "ingest",
            Task::Stats => "stats",
            Task::Index => "index",
            Task::TrainPair => "train-pair",
            Task::ExtractWeak => "extract-weak",
            Task::Score => "score",
            Task::Task1 => "task1",
            Task::Task2 => "task2",
            Task::Task3 => "task3",
            Task::Task4Entail => "task4-entail",
            Task::Task4Lawful => "task4-lawful",
            Task::SweepK => "sweep-k",
            Task::Eval => "eval",
            Task::GenSynth => "gen-synth",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// Keys that name input files. Each must exist when the config is validated.
pub const PATH_KEYS: [&str; 19] = [
    "articles",
    "case_queries",
    "cases",
    "civil_code",
    "fragments",
    "gold",
    "lawfulness_model",
    "lexical_scores",
    "model",
    "pairs",
    "predictions",
    "questions",
    "supporting_scores",
    "train_fragments",
    "train_questions",
    "vocab_a",
    "vocab_b",
    "tfidf_model",
    "index",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigMode {
    Strict,
    /// Unknown keys become warnings.
    Lax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub output_dir: PathBuf,
    /// Drives every random choice: SGD shuffles, negative sampling and the
    /// synthetic generator.
    pub seed: u64,
    pub paths: BTreeMap<&'static str, PathBuf>,
    /// Extra ensemble members for task 3, in order.
    pub ensemble_models: Vec<PathBuf>,
    pub case_format: CaseFormat,
    pub fusion: FusionConfig,
    pub bm25: Bm25Params,
    pub tokenizer: TokenizerConfig,
    pub k: usize,
    pub k_values: Vec<usize>,
    pub classifier_threshold: f64,
    pub ensemble_size: usize,
    pub task2_setting: u8,
    pub averaging: Averaging,
    pub approach: Approach,
    pub train: TrainParams,
    pub weak: WeakLabelConfig,
    pub synth: SyntheticSpec,
    pub bucket_width: usize,
    /// Score given to pairs missing from an external table.
    pub external_default: f64,
    pub warnings: Vec<String>,
    // Parameters of the selection and aggregation variants that are not
    // active, kept so key order in the file does not matter.
    threshold: f64,
    fixed_k: usize,
    mean_top_m: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            paths: BTreeMap::new(),
            ensemble_models: Vec::new(),
            case_format: CaseFormat::Jsonl,
            fusion: FusionConfig::default(),
            bm25: Bm25Params::default(),
            tokenizer: TokenizerConfig::default(),
            k: 150,
            k_values: vec![10, 30, 50, 70, 100, 120, 150],
            classifier_threshold: 0.5,
            ensemble_size: 2,
            task2_setting: 1,
            averaging: Averaging::Macro,
            approach: Approach::Entailment,
            train: TrainParams::default(),
            weak: WeakLabelConfig::default(),
            synth: SyntheticSpec::default(),
            bucket_width: 100,
            external_default: 0.0,
            warnings: Vec::new(),
            threshold: 0.5,
            fixed_k: 1,
            mean_top_m: 3,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::value(key, format!("cannot parse {value:?} as {}", std::any::type_name::<T>())))
}

fn unit_interval(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = num(key, value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(CliError::value(key, format!("{v} outside [0, 1]")));
    }
    Ok(v)
}

fn positive(key: &str, value: &str) -> Result<usize, CliError> {
    let v: usize = num(key, value)?;
    if v == 0 {
        return Err(CliError::value(key, "must be at least 1"));
    }
    Ok(v)
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::value(key, format!("expected true or false, got {value:?}"))),
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    /// Parses config text. Later `--set` overrides go through [`RunConfig::set`].
    pub fn parse(text: &str, mode: ConfigMode) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Syntax {
                    line: i + 1,
                    message: format!("expected key=value, got {line:?}"),
                });
            };
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), i + 1) {
                return Err(CliError::Syntax {
                    line: i + 1,
                    message: format!("`{key}` already set on line {prev}"),
                });
            }
            cfg.set(key, value.trim(), mode)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, mode: ConfigMode) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text, mode)
    }

    /// Applies one `key=value` override string.
    pub fn set_pair(&mut self, pair: &str, mode: ConfigMode) -> Result<(), CliError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Syntax { line: 0, message: format!("expected key=value, got {pair:?}") })?;
        self.set(key.trim(), value.trim(), mode)
    }

    pub fn set(&mut self, key: &str, value: &str, mode: ConfigMode) -> Result<(), CliError> {
        if let Some(&path_key) = PATH_KEYS.iter().find(|k| **k == key) {
            if value.is_empty() {
                self.paths.remove(path_key);
            } else {
                self.paths.insert(path_key, PathBuf::from(value));
            }
            return Ok(());
        }
        match key {
            "task" => self.task = Some(value.parse().map_err(|m| CliError::value(key, m))?),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "ensemble_models" => {
                self.ensemble_models = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
            }
            "case_format" => {
                self.case_format = match value {
                    "jsonl" => CaseFormat::Jsonl,
                    "plaintext_dir" => CaseFormat::PlaintextDir,
                    _ => return Err(CliError::value(key, format!("expected jsonl or plaintext_dir, got {value:?}"))),
                }
            }
            "alpha" => self.fusion.alpha = unit_interval(key, value)?,
            "top_n" => self.fusion.top_n = positive(key, value)?,
            "normalization" => {
                self.fusion.normalization = match value {
                    "minmax_per_query" => Normalization::MinmaxPerQuery,
                    "none" => Normalization::None,
                    _ => return Err(CliError::value(key, format!("expected minmax_per_query or none, got {value:?}"))),
                }
            }
            "selection" => {
                self.fusion.selection = match value {
                    "threshold" => Selection::Threshold(self.threshold),
                    "fixed_k" => Selection::FixedK(self.fixed_k),
                    _ => return Err(CliError::value(key, format!("expected threshold or fixed_k, got {value:?}"))),
                }
            }
            "threshold" => {
                let t = num::<f64>(key, value)?;
                if !t.is_finite() {
                    return Err(CliError::value(key, "must be finite"));
                }
                self.threshold = t;
                if let Selection::Threshold(_) = self.fusion.selection {
                    self.fusion.selection = Selection::Threshold(t);
                }
            }
            "fixed_k" => {
                self.fixed_k = positive(key, value)?;
                if let Selection::FixedK(_) = self.fusion.selection {
                    self.fusion.selection = Selection::FixedK(self.fixed_k);
                }
            }
            "aggregation" => {
                self.fusion.aggregation = match value {
                    "max" => Aggregation::Max,
                    "mean_top_m" => Aggregation::MeanTopM(self.mean_top_m),
                    _ => return Err(CliError::value(key, format!("expected max or mean_top_m, got {value:?}"))),
                }
            }
            "mean_top_m" => {
                self.mean_top_m = positive(key, value)?;
                if let Aggregation::MeanTopM(_) = self.fusion.aggregation {
                    self.fusion.aggregation = Aggregation::MeanTopM(self.mean_top_m);
                }
            }
            "k1" => {
                let k1: f64 = num(key, value)?;
                if !(k1 >= 0.0 && k1.is_finite()) {
                    return Err(CliError::value(key, format!("{k1} must be finite and >= 0")));
                }
                self.bm25.k1 = k1;
            }
            "b" => self.bm25.b = unit_interval(key, value)?,
            "lowercase" => self.tokenizer.lowercase = boolean(key, value)?,
            "stopwords" => {
                self.tokenizer.stopwords = match value {
                    "none" => None,
                    "english" => Some(english_stopwords()),
                    _ => return Err(CliError::value(key, format!("expected none or english, got {value:?}"))),
                }
            }
            "min_token_len" => self.tokenizer.min_token_len = positive(key, value)?,
            "k" => self.k = positive(key, value)?,
            "k_values" => {
                let ks: Vec<usize> = list(key, value)?;
                if ks.is_empty() || ks.contains(&0) {
                    return Err(CliError::value(key, "needs one or more values >= 1"));
                }
                self.k_values = ks;
            }
            "classifier_threshold" => self.classifier_threshold = unit_interval(key, value)?,
            "ensemble_size" => self.ensemble_size = positive(key, value)?,
            "task2_setting" => {
                self.task2_setting = match value {
                    "1" | "2" | "3" => num(key, value)?,
                    _ => return Err(CliError::value(key, format!("expected 1, 2 or 3, got {value:?}"))),
                }
            }
            "averaging" => {
                self.averaging = match value {
                    "macro" => Averaging::Macro,
                    "micro" => Averaging::Micro,
                    _ => return Err(CliError::value(key, format!("expected macro or micro, got {value:?}"))),
                }
            }
            "approach" => {
                self.approach = match value {
                    "entailment" => Approach::Entailment,
                    "lawfulness" => Approach::Lawfulness,
                    _ => return Err(CliError::value(key, format!("expected entailment or lawfulness, got {value:?}"))),
                }
            }
            "epochs" => self.train.epochs = num(key, value)?,
            "lr" => {
                let lr: f64 = num(key, value)?;
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(CliError::value(key, format!("{lr} must be positive")));
                }
                self.train.lr = lr;
            }
            "l2" => {
                let l2: f64 = num(key, value)?;
                if !(l2 >= 0.0 && l2.is_finite()) {
                    return Err(CliError::value(key, format!("{l2} must be >= 0")));
                }
                self.train.l2 = l2;
            }
            "dim" => {
                let dim = positive(key, value)?;
                if !dim.is_power_of_two() {
                    return Err(CliError::value(key, format!("{dim} is not a power of two")));
                }
                self.train.dim = dim;
            }
            "hash_seed" => self.train.hash_seed = num(key, value)?,
            "markers" => {
                let markers: Vec<String> =
                    value.split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                if markers.is_empty() {
                    return Err(CliError::value(key, "needs at least one marker"));
                }
                self.weak.marker_list = markers;
            }
            "negatives_per_positive" => self.weak.negatives_per_positive = positive(key, value)?,
            "min_negative_distance" => {
                let d: usize = num(key, value)?;
                if d < 2 {
                    return Err(CliError::value(key, "must be at least 2"));
                }
                self.weak.min_negative_distance = d;
            }
            "n_cases" => self.synth.n_cases = positive(key, value)?,
            "paragraphs_min" => self.synth.paragraphs_per_case.0 = positive(key, value)?,
            "paragraphs_max" => self.synth.paragraphs_per_case.1 = positive(key, value)?,
            "planted_support_rate" => self.synth.planted_support_rate = unit_interval(key, value)?,
            "vocab_size" => self.synth.vocab_size = positive(key, value)?,
            "n_articles" => self.synth.n_articles = num(key, value)?,
            "n_questions" => self.synth.n_questions = num(key, value)?,
            "n_fragments" => self.synth.n_fragments = num(key, value)?,
            "bucket_width" => self.bucket_width = positive(key, value)?,
            "external_default" => self.external_default = unit_interval(key, value)?,
            _ => match mode {
                ConfigMode::Strict => return Err(CliError::UnknownKey(key.to_string())),
                ConfigMode::Lax => {
                    log::warn!("ignoring unknown config key `{key}`");
                    self.warnings.push(format!("unknown key `{key}` ignored"));
                }
            },
        }
        Ok(())
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    pub fn require(&self, key: &'static str) -> Result<&Path, CliError> {
        self.path(key).ok_or(CliError::MissingKey(key))
    }

    /// Training parameters with the run seed applied.
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn weak_config(&self) -> WeakLabelConfig {
        WeakLabelConfig {
            seed: self.seed,
            ..self.weak.clone()
        }
    }

    pub fn synth_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    /// Checks required keys for the task, cross-key rules and that every
    /// referenced input exists.
    pub fn validate(&self) -> Result<Task, CliError> {
        let task = self.task.ok_or(CliError::MissingKey("task"))?;
        let any_of = |keys: &[&'static str]| -> Result<(), CliError> {
            if keys.iter().any(|k| self.paths.contains_key(k)) {
                Ok(())
            } else {
                Err(CliError::MissingKey(keys[0]))
            }
        };
        match task {
            Task::Ingest => any_of(&["cases", "civil_code", "articles", "questions"])?,
            Task::Stats => any_of(&["cases", "articles", "civil_code", "questions", "vocab_a"])?,
            Task::Index => any_of(&["cases", "articles", "civil_code"])?,
            Task::ExtractWeak => any_of(&["cases"])?,
            Task::TrainPair => any_of(&["pairs", "cases"])?,
            Task::Score => {
                any_of(&["pairs"])?;
                any_of(&["model", "supporting_scores"])?;
            }
            Task::Task1 => {
                any_of(&["cases"])?;
                any_of(&["case_queries"])?;
            }
            Task::Task2 => {
                any_of(&["cases"])?;
                any_of(&["fragments"])?;
                if self.task2_setting == 3 {
                    any_of(&["lexical_scores"])?;
                    if self.paths.contains_key("supporting_scores") {
                        return Err(CliError::value(
                            "supporting_scores",
                            "task2 setting 3 takes external scores in the lexical slot only (use lexical_scores)",
                        ));
                    }
                } else if self.paths.contains_key("lexical_scores") {
                    return Err(CliError::value("lexical_scores", "only used by task2_setting=3"));
                }
            }
            Task::Task3 | Task::Task4Entail | Task::Task4Lawful | Task::SweepK => {
                any_of(&["questions"])?;
                any_of(&["articles", "civil_code"])?;
            }
            Task::Eval => {
                any_of(&["predictions"])?;
                any_of(&["gold"])?;
            }
            Task::GenSynth => self.synth_spec().validate()?,
        }
        if self.paths.contains_key("vocab_a") != self.paths.contains_key("vocab_b") {
            return Err(CliError::MissingKey(if self.paths.contains_key("vocab_a") { "vocab_b" } else { "vocab_a" }));
        }
        self.fusion.validate()?;
        self.bm25.validate()?;
        self.tokenizer.validate()?;
        self.train_params().validate()?;
        self.weak_config().validate()?;
        for (key, path) in &self.paths {
            if !path.exists() {
                return Err(CliError::value(key, format!("{} does not exist", path.display())));
            }
        }
        for path in &self.ensemble_models {
            if !path.exists() {
                return Err(CliError::value("ensemble_models", format!("{} does not exist", path.display())));
            }
        }
        Ok(task)
    }

    /// Every setting with its resolved value, sorted by key.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        if let Some(t) = self.task {
            put("task", t.name().into());
        }
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        for (k, p) in &self.paths {
            put(k, p.display().to_string());
        }
        if !self.ensemble_models.is_empty() {
            put("ensemble_models", join(&self.ensemble_models.iter().map(|p| p.display()).collect::<Vec<_>>(), ","));
        }
        put(
            "case_format",
            match self.case_format {
                CaseFormat::Jsonl => "jsonl",
                CaseFormat::PlaintextDir => "plaintext_dir",
            }
            .into(),
        );
        put("alpha", self.fusion.alpha.to_string());
        put("top_n", self.fusion.top_n.to_string());
        put(
            "normalization",
            match self.fusion.normalization {
                Normalization::MinmaxPerQuery => "minmax_per_query",
                Normalization::None => "none",
            }
            .into(),
        );
        let (selection, threshold, fixed_k) = match self.fusion.selection {
            Selection::Threshold(t) => ("threshold", t, self.fixed_k),
            Selection::FixedK(m) => ("fixed_k", self.threshold, m),
        };
        put("selection", selection.into());
        put("threshold", threshold.to_string());
        put("fixed_k", fixed_k.to_string());
        let (aggregation, mean_top_m) = match self.fusion.aggregation {
            Aggregation::Max => ("max", self.mean_top_m),
            Aggregation::MeanTopM(m) => ("mean_top_m", m),
        };
        put("aggregation", aggregation.into());
        put("mean_top_m", mean_top_m.to_string());
        put("k1", self.bm25.k1.to_string());
        put("b", self.bm25.b.to_string());
        put("lowercase", self.tokenizer.lowercase.to_string());
        put("stopwords", if self.tokenizer.stopwords.is_some() { "english" } else { "none" }.into());
        put("min_token_len", self.tokenizer.min_token_len.to_string());
        put("k", self.k.to_string());
        put("k_values", join(&self.k_values, ","));
        put("classifier_threshold", self.classifier_threshold.to_string());
        put("ensemble_size", self.ensemble_size.to_string());
        put("task2_setting", self.task2_setting.to_string());
        put(
            "averaging",
            match self.averaging {
                Averaging::Macro => "macro",
                Averaging::Micro => "micro",
            }
            .into(),
        );
        put(
            "approach",
            match self.approach {
                Approach::Entailment => "entailment",
                Approach::Lawfulness => "lawfulness",
            }
            .into(),
        );
        put("epochs", self.train.epochs.to_string());
        put("lr", self.train.lr.to_string());
        put("l2", self.train.l2.to_string());
        put("dim", self.train.dim.to_string());
        put("hash_seed", self.train.hash_seed.to_string());
        put("markers", self.weak.marker_list.join("|"));
        put("negatives_per_positive", self.weak.negatives_per_positive.to_string());
        put("min_negative_distance", self.weak.min_negative_distance.to_string());
        put("n_cases", self.synth.n_cases.to_string());
        put("paragraphs_min", self.synth.paragraphs_per_case.0.to_string());
        put("paragraphs_max", self.synth.paragraphs_per_case.1.to_string());
        put("planted_support_rate", self.synth.planted_support_rate.to_string());
        put("vocab_size", self.synth.vocab_size.to_string());
        put("n_articles", self.synth.n_articles.to_string());
        put("n_questions", self.synth.n_questions.to_string());
        put("n_fragments", self.synth.n_fragments.to_string());
        put("bucket_width", self.bucket_width.to_string());
        put("external_default", self.external_default.to_string());
        m
    }

    /// The resolved configuration in config-file syntax.
    pub fn to_config_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 over [`RunConfig::to_config_text`], leaving out `output_dir`
    /// so that reruns into another directory hash the same.
    pub fn config_hash(&self) -> String {
        let text: String = self
            .entries()
            .into_iter()
            .filter(|(k, _)| k != "output_dir")
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        fingerprint(text.as_bytes())
    }
}
