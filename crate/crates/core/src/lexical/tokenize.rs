use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::LexicalError;

/// Controls how raw text becomes index terms.
///
/// Text is always split on non-alphanumeric boundaries. Stopwords are matched
/// after lowercasing, so a lowercase stopword list works with `lowercase = true`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stopwords: Option<BTreeSet<String>>,
    pub min_token_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: None,
            min_token_len: 1,
        }
    }
}

impl TokenizerConfig {
    pub fn with_stopwords(mut self, words: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.stopwords = Some(words.into_iter().map(Into::into).collect());
        self
    }

    pub fn validate(&self) -> Result<(), LexicalError> {
        if self.min_token_len < 1 {
            return Err(LexicalError::Config("min_token_len must be at least 1".into()));
        }
        Ok(())
    }

    fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.as_ref().is_some_and(|s| s.contains(token))
    }
}

/// A short English function-word list for use with [`TokenizerConfig::with_stopwords`].
pub fn english_stopwords() -> BTreeSet<String> {
    [
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "is",
        "it", "its", "of", "on", "or", "that", "the", "this", "to", "was", "were", "which", "with",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Splits `text` into terms according to `config`.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|raw| !raw.is_empty())
        .map(|raw| {
            if config.lowercase {
                raw.to_lowercase()
            } else {
                raw.to_string()
            }
        })
        .filter(|tok| tok.chars().count() >= config.min_token_len && !config.is_stopword(tok))
        .collect()
}
