//! Legal corpus units and their canonical on-disk formats.
//!
//! Canonical formats are UTF-8 JSONL, one record per line:
//!
//! | file                | record                                                              |
//! |---------------------|---------------------------------------------------------------------|
//! | `cases.jsonl`       | `{"id", "paragraphs": [..]}`                                        |
//! | `articles.jsonl`    | `{"id", "part", "chapter", "section", "summary_line", "content"}`   |
//! | `questions.jsonl`   | `{"id", "content", "relevant_article_ids": [..], "label": "Y"/"N"/null}` |
//! | `case_queries.jsonl`| `{"query_id", "candidates": [..], "gold": [..]}`                    |
//! | `fragments.jsonl`   | `{"query_id", "case_id", "fragment", "gold": [..]}`                 |
//!
//! Plain-text case directories hold one document per file, paragraphs
//! separated by blank lines; the file stem becomes the document id.

mod civil_code;
mod sentences;
mod stats;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use civil_code::{count_article_markers, parse_civil_code};
pub use sentences::{split_sentences, SentenceSplitter};
pub use stats::{compute_corpus_stats, CorpusStats, LabeledQuery, StatsConfig, StatsUnit};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("question {question:?} references unknown article {article:?}")]
    UnresolvedArticle { question: String, article: String },
}

impl CorpusError {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Yes/No answer of a bar question; serialized as `"Y"` / `"N"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Answer {
    #[serde(rename = "Y")]
    Yes,
    #[serde(rename = "N")]
    No,
}

impl Answer {
    pub fn flipped(self) -> Self {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Answer::Yes => "Y",
            Answer::No => "N",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub ordinal: usize,
    pub text: String,
    pub sentences: Vec<String>,
}

/// A case-law document: an ordered, non-empty list of paragraphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseDocument {
    pub id: String,
    pub paragraphs: Vec<Paragraph>,
    pub source_path: Option<String>,
}

impl CaseDocument {
    pub fn new(
        id: impl Into<String>,
        paragraphs: impl IntoIterator<Item = impl Into<String>>,
        splitter: &SentenceSplitter,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(CorpusError::Invalid("case id is empty".into()));
        }
        let paragraphs: Vec<Paragraph> = paragraphs
            .into_iter()
            .enumerate()
            .map(|(ordinal, text)| {
                let text: String = text.into();
                if text.trim().is_empty() {
                    return Err(CorpusError::Invalid(format!("case {id:?} paragraph {ordinal} is empty")));
                }
                let sentences = splitter.split(&text);
                Ok(Paragraph {
                    ordinal,
                    text,
                    sentences,
                })
            })
            .collect::<Result<_, _>>()?;
        if paragraphs.is_empty() {
            return Err(CorpusError::Invalid(format!("case {id:?} has no paragraphs")));
        }
        Ok(Self {
            id,
            paragraphs,
            source_path: None,
        })
    }

    pub fn paragraph_texts(&self) -> Vec<&str> {
        self.paragraphs.iter().map(|p| p.text.as_str()).collect()
    }

    fn to_record(&self) -> CaseRecord {
        CaseRecord {
            id: self.id.clone(),
            paragraphs: self.paragraphs.iter().map(|p| p.text.clone()).collect(),
            source_path: self.source_path.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseRecord {
    id: String,
    paragraphs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_path: Option<String>,
}

/// One Civil Code article with its structural context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatuteArticle {
    pub id: String,
    pub part: String,
    pub chapter: String,
    pub section: String,
    #[serde(default)]
    pub summary_line: String,
    pub content: String,
}

impl StatuteArticle {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::Invalid("article id is empty".into()));
        }
        if self.content.trim().is_empty() {
            return Err(CorpusError::Invalid(format!("article {:?} has empty content", self.id)));
        }
        Ok(())
    }

    /// Summary line and content, as used for ranking and pair scoring.
    pub fn retrieval_text(&self) -> String {
        if self.summary_line.is_empty() {
            self.content.clone()
        } else {
            format!("{} {}", self.summary_line, self.content)
        }
    }
}

/// A yes/no bar-exam question, optionally labeled with gold articles and answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarQuestion {
    pub id: String,
    pub content: String,
    #[serde(default)]
    pub relevant_article_ids: BTreeSet<String>,
    #[serde(default)]
    pub label: Option<Answer>,
}

impl BarQuestion {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::Invalid("question id is empty".into()));
        }
        if self.content.trim().is_empty() {
            return Err(CorpusError::Invalid(format!("question {:?} has empty content", self.id)));
        }
        Ok(())
    }
}

/// A case retrieval query: a base case, its candidate pool and the noticed cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseQuery {
    pub query_id: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub gold: BTreeSet<String>,
}

/// An entailed fragment to be located among the paragraphs of `case_id`.
/// Gold entries are paragraph ordinals rendered as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentQuery {
    pub query_id: String,
    pub case_id: String,
    pub fragment: String,
    #[serde(default)]
    pub gold: BTreeSet<String>,
}

/// Input layout for [`parse_case_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Jsonl,
    PlaintextDir,
}

/// Loads a case corpus from a JSONL file or a directory of plain-text files.
pub fn parse_case_corpus(path: &Path, format: CaseFormat) -> Result<Vec<CaseDocument>, CorpusError> {
    let splitter = SentenceSplitter::default();
    let docs = match format {
        CaseFormat::Jsonl => {
            let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
            read_jsonl::<CaseRecord, _>(BufReader::new(file), &path.display().to_string())?
                .into_iter()
                .map(|(line, rec)| {
                    let mut doc = CaseDocument::new(rec.id, rec.paragraphs, &splitter)
                        .map_err(|e| CorpusError::parse(format!("{}:{line}", path.display()), e.to_string()))?;
                    doc.source_path = rec.source_path;
                    Ok(doc)
                })
                .collect::<Result<Vec<_>, CorpusError>>()?
        }
        CaseFormat::PlaintextDir => {
            let mut files = Vec::new();
            for entry in fs::read_dir(path).map_err(|e| CorpusError::io(path, e))? {
                let entry = entry.map_err(|e| CorpusError::io(path, e))?;
                let p = entry.path();
                if p.is_file() {
                    files.push(p);
                }
            }
            files.sort();
            files
                .par_iter()
                .map(|p| parse_plaintext_case(p, &splitter))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    check_unique(docs.iter().map(|d| d.id.as_str()))?;
    Ok(docs)
}

fn parse_plaintext_case(path: &Path, splitter: &SentenceSplitter) -> Result<CaseDocument, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CorpusError::parse(path.display().to_string(), "file name is not valid UTF-8"))?;
    let mut doc = CaseDocument::new(id, split_blank_line_paragraphs(&text), splitter)
        .map_err(|e| CorpusError::parse(path.display().to_string(), e.to_string()))?;
    doc.source_path = Some(path.display().to_string());
    Ok(doc)
}

/// Paragraphs separated by one or more whitespace-only lines.
pub fn split_blank_line_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }
    paragraphs
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Reads non-blank JSONL lines, returning each record with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, source: &str) -> Result<Vec<(usize, T)>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::parse(format!("{source}:{line_no}"), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CorpusError::parse(format!("{source}:{line_no}"), e.to_string()))?;
        out.push((line_no, rec));
    }
    Ok(out)
}

/// Writes one compact JSON record per line.
pub fn write_jsonl<T: Serialize, W: Write>(w: &mut W, records: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn load_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn write_cases_jsonl<W: Write>(w: &mut W, docs: &[CaseDocument]) -> std::io::Result<()> {
    write_jsonl(w, docs.iter().map(CaseDocument::to_record))
}

pub fn read_articles_jsonl(path: &Path) -> Result<Vec<StatuteArticle>, CorpusError> {
    let mut out = Vec::new();
    for (line, art) in load_records::<StatuteArticle>(path)? {
        art.validate()
            .map_err(|e| CorpusError::parse(format!("{}:{line}", path.display()), e.to_string()))?;
        out.push(art);
    }
    check_unique(out.iter().map(|a| a.id.as_str()))?;
    Ok(out)
}

pub fn write_articles_jsonl<W: Write>(w: &mut W, articles: &[StatuteArticle]) -> std::io::Result<()> {
    write_jsonl(w, articles)
}

pub fn read_questions_jsonl(path: &Path) -> Result<Vec<BarQuestion>, CorpusError> {
    let mut out = Vec::new();
    for (line, q) in load_records::<BarQuestion>(path)? {
        q.validate()
            .map_err(|e| CorpusError::parse(format!("{}:{line}", path.display()), e.to_string()))?;
        out.push(q);
    }
    check_unique(out.iter().map(|q| q.id.as_str()))?;
    Ok(out)
}

pub fn write_questions_jsonl<W: Write>(w: &mut W, questions: &[BarQuestion]) -> std::io::Result<()> {
    write_jsonl(w, questions)
}

pub fn read_case_queries_jsonl(path: &Path) -> Result<Vec<CaseQuery>, CorpusError> {
    let out: Vec<CaseQuery> = load_records(path)?.into_iter().map(|(_, q)| q).collect();
    check_unique(out.iter().map(|q| q.query_id.as_str()))?;
    Ok(out)
}

pub fn read_fragments_jsonl(path: &Path) -> Result<Vec<FragmentQuery>, CorpusError> {
    let out: Vec<FragmentQuery> = load_records(path)?.into_iter().map(|(_, q)| q).collect();
    check_unique(out.iter().map(|q| q.query_id.as_str()))?;
    Ok(out)
}

/// Checks that every labeled question's gold articles exist in `articles`.
pub fn resolve_question_articles(questions: &[BarQuestion], articles: &[StatuteArticle]) -> Result<(), CorpusError> {
    let known: HashSet<&str> = articles.iter().map(|a| a.id.as_str()).collect();
    for q in questions {
        if let Some(missing) = q.relevant_article_ids.iter().find(|id| !known.contains(id.as_str())) {
            return Err(CorpusError::UnresolvedArticle {
                question: q.id.clone(),
                article: missing.clone(),
            });
        }
    }
    Ok(())
}

/// Reads a Civil Code text file and parses it.
pub fn load_civil_code(path: &Path) -> Result<Vec<StatuteArticle>, CorpusError> {
    let mut raw = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut raw))
        .map_err(|e| CorpusError::io(path, e))?;
    let articles = parse_civil_code(&raw)?;
    check_unique(articles.iter().map(|a| a.id.as_str()))?;
    Ok(articles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        fs::File::create(path).unwrap().write_all(text.as_bytes()).unwrap();
    }

    #[test]
    fn jsonl_record_becomes_document() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.jsonl");
        write(&p, "{\"id\":\"c1\",\"paragraphs\":[\"p one\",\"p two\"]}\n");
        let docs = parse_case_corpus(&p, CaseFormat::Jsonl).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].id, "c1");
        assert_eq!(docs[0].paragraphs.len(), 2);
        assert_eq!(docs[0].paragraphs[1].ordinal, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.jsonl");
        write(
            &p,
            "{\"id\":\"c1\",\"paragraphs\":[\"a\"]}\n{\"id\":\"c1\",\"paragraphs\":[\"b\"]}\n",
        );
        assert!(matches!(
            parse_case_corpus(&p, CaseFormat::Jsonl),
            Err(CorpusError::DuplicateId(id)) if id == "c1"
        ));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.jsonl");
        write(&p, "{\"id\":\"c1\",\"paragraphs\":[\"a\"]}\n\n{\"id\": 3}\n");
        let err = parse_case_corpus(&p, CaseFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("cases.jsonl:3"), "{err}");
        write(&p, "{\"id\":\"c1\",\"paragraphs\":[]}\n");
        assert!(parse_case_corpus(&p, CaseFormat::Jsonl).unwrap_err().to_string().contains(":1"));
    }

    #[test]
    fn plaintext_blank_line_paragraphs() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("case_b.txt"), "A\n\nB\n\nC");
        write(&dir.path().join("case_a.txt"), "First line\ncontinues.\n   \n\nSecond.\n");
        let docs = parse_case_corpus(dir.path(), CaseFormat::PlaintextDir).unwrap();
        assert_eq!(docs.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), vec!["case_a", "case_b"]);
        assert_eq!(docs[1].paragraph_texts(), vec!["A", "B", "C"]);
        assert_eq!(docs[0].paragraph_texts(), vec!["First line\ncontinues.", "Second."]);
        assert!(docs[0].source_path.as_deref().unwrap().ends_with("case_a.txt"));
    }

    #[test]
    fn jsonl_round_trip() {
        let splitter = SentenceSplitter::default();
        let mut a = CaseDocument::new("a", ["One. Two.", "Three."], &splitter).unwrap();
        a.source_path = Some("orig/a.txt".into());
        let b = CaseDocument::new("b", ["Four."], &splitter).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.jsonl");
        let mut buf = Vec::new();
        write_cases_jsonl(&mut buf, &[a.clone(), b.clone()]).unwrap();
        fs::write(&p, &buf).unwrap();
        assert_eq!(parse_case_corpus(&p, CaseFormat::Jsonl).unwrap(), vec![a, b]);
    }

    #[test]
    fn question_labels_serialize_as_codes() {
        let q = BarQuestion {
            id: "H18-9-2".into(),
            content: "Statutory real rights exist.".into(),
            relevant_article_ids: ["303".to_string()].into(),
            label: Some(Answer::No),
        };
        let json = serde_json::to_string(&q).unwrap();
        assert!(json.contains("\"label\":\"N\""), "{json}");
        let unlabeled: BarQuestion = serde_json::from_str(r#"{"id":"q","content":"x","label":null}"#).unwrap();
        assert_eq!(unlabeled.label, None);
        assert!(unlabeled.relevant_article_ids.is_empty());
    }

    #[test]
    fn unresolved_gold_article() {
        let art = StatuteArticle {
            id: "1".into(),
            part: String::new(),
            chapter: String::new(),
            section: String::new(),
            summary_line: String::new(),
            content: "x".into(),
        };
        let q = BarQuestion {
            id: "q".into(),
            content: "c".into(),
            relevant_article_ids: ["2".to_string()].into(),
            label: Some(Answer::Yes),
        };
        assert!(matches!(
            resolve_question_articles(&[q], &[art]),
            Err(CorpusError::UnresolvedArticle { .. })
        ));
    }
}
