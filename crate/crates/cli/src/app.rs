//! Subcommands and flags of the `legalir` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigMode, RunConfig, Task};
use crate::run::{execute, RunOutcome};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "legalir", version, about = "Legal case and statute retrieval, entailment and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    Entailment,
    Lawfulness,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Format of the summary printed to stdout. Both are always written to disk.
    #[arg(long, value_enum, default_value = "md")]
    pub format: OutputFormat,
    /// Extra config entry, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Warn about unknown config keys instead of failing.
    #[arg(long)]
    pub lax: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate corpora and rewrite them in canonical JSONL.
    Ingest(CommonArgs),
    /// Corpus length and label statistics.
    Stats(CommonArgs),
    /// Build and store the BM25 paragraph index and the Tf-idf article model.
    Index(CommonArgs),
    /// Train a pair scorer from a pair file or from weak pairs.
    TrainPair(CommonArgs),
    /// Extract weakly labeled pairs from conclusion markers.
    ExtractWeak(CommonArgs),
    /// Score a pair file into an external score table.
    Score(CommonArgs),
    /// Case retrieval.
    RunTask1(CommonArgs),
    /// Supporting paragraph retrieval.
    RunTask2(CommonArgs),
    /// Statute article retrieval.
    RunTask3(CommonArgs),
    /// Yes/no answering.
    RunTask4 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        approach: Option<ApproachArg>,
    },
    /// Tf-idf candidate recall over several k.
    SweepK(CommonArgs),
    /// Score a predictions file against gold labels.
    Eval(CommonArgs),
    /// Write a synthetic corpus with known gold.
    GenSynth(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Ingest(c)
            | Command::Stats(c)
            | Command::Index(c)
            | Command::TrainPair(c)
            | Command::ExtractWeak(c)
            | Command::Score(c)
            | Command::RunTask1(c)
            | Command::RunTask2(c)
            | Command::RunTask3(c)
            | Command::SweepK(c)
            | Command::Eval(c)
            | Command::GenSynth(c) => c,
            Command::RunTask4 { common, .. } => common,
        }
    }
}

/// Resolves file, `--set` entries and flags (in that order of precedence,
/// lowest first) into a run configuration for `command`.
pub fn resolve_config(command: &Command) -> Result<RunConfig, CliError> {
    let args = command.common();
    let mode = if args.lax { ConfigMode::Lax } else { ConfigMode::Strict };
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path, mode)?,
        None => RunConfig::default(),
    };
    for pair in &args.set {
        cfg.set_pair(pair, mode)?;
    }
    let flags = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("output_dir", args.out.as_ref().map(|p| p.display().to_string())),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("top_n", args.top_n.map(|v| v.to_string())),
        ("k", args.k.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            cfg.set(key, &value, ConfigMode::Strict)?;
        }
    }
    let task = match command {
        Command::Ingest(_) => Task::Ingest,
        Command::Stats(_) => Task::Stats,
        Command::Index(_) => Task::Index,
        Command::TrainPair(_) => Task::TrainPair,
        Command::ExtractWeak(_) => Task::ExtractWeak,
        Command::Score(_) => Task::Score,
        Command::RunTask1(_) => Task::Task1,
        Command::RunTask2(_) => Task::Task2,
        Command::RunTask3(_) => Task::Task3,
        Command::RunTask4 { approach, .. } => {
            if let Some(a) = approach {
                let name = match a {
                    ApproachArg::Entailment => "entailment",
                    ApproachArg::Lawfulness => "lawfulness",
                };
                cfg.set("approach", name, ConfigMode::Strict)?;
            }
            match cfg.approach {
                legalir_core::entail::Approach::Entailment => Task::Task4Entail,
                legalir_core::entail::Approach::Lawfulness => Task::Task4Lawful,
            }
        }
        Command::SweepK(_) => Task::SweepK,
        Command::Eval(_) => Task::Eval,
        Command::GenSynth(_) => Task::GenSynth,
    };
    if let Some(previous) = cfg.task.filter(|t| *t != task) {
        cfg.warnings.push(format!("config task {previous} replaced by subcommand task {task}"));
    }
    cfg.task = Some(task);
    Ok(cfg)
}

/// Runs the parsed command and renders the stdout summary.
pub fn dispatch(cli: &Cli) -> Result<(RunOutcome, String), CliError> {
    let cfg = resolve_config(&cli.command)?;
    let outcome = execute(&cfg)?;
    let summary = match cli.command.common().format {
        OutputFormat::Md => outcome.markdown.clone(),
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&outcome.report).expect("report serializes")),
    };
    Ok((outcome, summary))
}
