use std::collections::HashSet;

/// Rule-based sentence splitter.
///
/// A boundary is a run of `.`, `?` or `!` (optionally followed by closing
/// quotes or brackets), then whitespace, then an uppercase letter or a digit.
/// A period that ends a listed abbreviation never closes a sentence.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "art.", "arts.", "c.j.", "cf.", "ch.", "co.", "corp.", "dr.", "e.g.", "i.e.", "inc.", "j.", "jj.",
    "ltd.", "mr.", "mrs.", "ms.", "no.", "nos.", "p.", "para.", "paras.", "pp.", "s.", "sec.", "ss.",
    "st.", "v.", "vs.",
];

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    /// Abbreviations are matched case-insensitively and include their final period.
    pub fn with_abbreviations(abbrevs: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        Self {
            abbreviations: abbrevs.into_iter().map(|a| a.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn add_abbreviation(&mut self, abbrev: &str) {
        self.abbreviations.insert(abbrev.to_lowercase());
    }

    pub fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
        let mut sentences = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i].1;
            if !matches!(c, '.' | '?' | '!') {
                i += 1;
                continue;
            }
            let mut end = i + 1;
            while end < chars.len() && is_terminal_tail(chars[end].1) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let opens_sentence = next > end
                && next < chars.len()
                && (chars[next].1.is_uppercase() || chars[next].1.is_ascii_digit());
            if opens_sentence && !(c == '.' && self.ends_with_abbreviation(text, byte_at(i))) {
                push_trimmed(&mut sentences, &text[start..byte_at(end)]);
                start = byte_at(next);
                i = next;
            } else {
                i = end;
            }
        }
        push_trimmed(&mut sentences, &text[start..]);
        sentences
    }

    /// Whether the word ending with the period at byte `dot` is an abbreviation.
    fn ends_with_abbreviation(&self, text: &str, dot: usize) -> bool {
        let head = &text[..dot];
        let word_start = head.rfind(char::is_whitespace).map_or(0, |p| p + 1);
        let word = text[word_start..=dot].trim_start_matches(|c: char| !c.is_alphanumeric());
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

fn is_terminal_tail(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | '"' | '\'' | ')' | ']' | '\u{2019}' | '\u{201d}')
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default().split(text)
}
