use std::path::PathBuf;

use legalir_core::corpus::CorpusError;
use legalir_core::entail::EntailError;
use legalir_core::eval::EvalError;
use legalir_core::lexical::LexicalError;
use legalir_core::pairscore::PairScoreError;
use legalir_core::pipelines::PipelineError;
use legalir_core::FormatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    PairScore(#[from] PairScoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Entail(#[from] EntailError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
}

impl CliError {
    pub(crate) fn value(key: &str, message: impl Into<String>) -> Self {
        Self::Value {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    /// Short stable name of the error family, for the diagnostics line.
    pub fn class(&self) -> &'static str {
        match self {
            Self::Syntax { .. } | Self::MissingKey(_) | Self::UnknownKey(_) | Self::Value { .. } => "config",
            Self::Input(_) => "input",
            Self::Io { .. } => "io",
            Self::Corpus(_) => "corpus",
            Self::Lexical(_) => "lexical",
            Self::PairScore(_) => "pairscore",
            Self::Pipeline(_) => "pipeline",
            Self::Entail(_) => "entail",
            Self::Eval(_) => "eval",
            Self::Format { .. } => "format",
        }
    }

    /// One JSON object on one line: `{"error":<class>,"message":<text>}`.
    pub fn diagnostic_line(&self) -> String {
        serde_json::json!({ "error": self.class(), "message": self.to_string() }).to_string()
    }
}
