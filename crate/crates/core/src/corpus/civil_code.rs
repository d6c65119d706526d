//! Pattern-matching parser for the plain-text Civil Code layout.
//!
//! ```text
//! Part II Real Rights
//! Chapter VIII Statutory Liens
//! Section 1 General Provisions
//! (Content of Statutory Liens)
//! Article 303 The holder of a statutory lien has ...
//! ```
//!
//! A `Part` heading clears the chapter and section context, a `Chapter`
//! heading clears the section. `Subsection` and `Division` headings end the
//! current article but leave the recorded context unchanged.

use std::sync::OnceLock;

use regex::Regex;

use super::{CorpusError, StatuteArticle};

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(Part|Chapter|Section|Subsection|Division)\s+([IVXLCDM]+|\d+)\b").unwrap())
}

fn article_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Article\s+(\d+(?:-\d+)*)(?:\s+(.*))?$").unwrap())
}

fn summary_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\([^()]*\)$").unwrap())
}

struct OpenArticle {
    id: String,
    line: usize,
    part: String,
    chapter: String,
    section: String,
    summary_line: String,
    body: Vec<String>,
}

#[derive(Default)]
struct Parser {
    part: String,
    chapter: String,
    section: String,
    current: Option<OpenArticle>,
    pending_summary: Option<(String, usize)>,
    articles: Vec<StatuteArticle>,
}

impl Parser {
    fn body_line(&mut self, text: String, line: usize) -> Result<(), CorpusError> {
        match self.current.as_mut() {
            Some(open) => {
                open.body.push(text);
                Ok(())
            }
            None => Err(CorpusError::parse(
                format!("line {line}"),
                "body text before any Article marker",
            )),
        }
    }

    /// A parenthesized line not followed by an article marker is ordinary body text.
    fn demote_pending(&mut self) -> Result<(), CorpusError> {
        if let Some((text, line)) = self.pending_summary.take() {
            self.body_line(text, line)?;
        }
        Ok(())
    }

    fn close(&mut self) -> Result<(), CorpusError> {
        if let Some(open) = self.current.take() {
            if open.body.is_empty() {
                return Err(CorpusError::parse(
                    format!("line {}", open.line),
                    format!("empty body for Article {}", open.id),
                ));
            }
            self.articles.push(StatuteArticle {
                id: open.id,
                part: open.part,
                chapter: open.chapter,
                section: open.section,
                summary_line: open.summary_line,
                content: open.body.join("\n"),
            });
        }
        Ok(())
    }
}

/// Parses raw Civil Code text into articles, in document order.
pub fn parse_civil_code(raw: &str) -> Result<Vec<StatuteArticle>, CorpusError> {
    let mut p = Parser::default();
    for (idx, raw_line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(caps) = heading_re().captures(line) {
            p.demote_pending()?;
            p.close()?;
            match &caps[1] {
                "Part" => {
                    p.part = line.to_string();
                    p.chapter.clear();
                    p.section.clear();
                }
                "Chapter" => {
                    p.chapter = line.to_string();
                    p.section.clear();
                }
                "Section" => p.section = line.to_string(),
                _ => {}
            }
        } else if let Some(caps) = article_re().captures(line) {
            p.close()?;
            let summary_line = p.pending_summary.take().map(|(s, _)| s).unwrap_or_default();
            let body = caps
                .get(2)
                .map(|m| m.as_str().trim())
                .filter(|s| !s.is_empty())
                .map(|s| vec![s.to_string()])
                .unwrap_or_default();
            p.current = Some(OpenArticle {
                id: caps[1].to_string(),
                line: line_no,
                part: p.part.clone(),
                chapter: p.chapter.clone(),
                section: p.section.clone(),
                summary_line,
                body,
            });
        } else if summary_re().is_match(line) {
            p.demote_pending()?;
            p.pending_summary = Some((line.to_string(), line_no));
        } else {
            p.demote_pending()?;
            p.body_line(line.to_string(), line_no)?;
        }
    }
    p.demote_pending()?;
    p.close()?;
    Ok(p.articles)
}

/// Number of lines that open an article.
pub fn count_article_markers(raw: &str) -> usize {
    raw.lines().filter(|l| article_re().is_match(l.trim())).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ARTICLES: &str = "\
Part I General Provisions
Chapter II Persons
Section 1 Capacity to Hold Rights
(Enjoyment of Private Rights)
Article 3 (1) The enjoyment of private rights commences at birth.
(2) Unless otherwise prohibited, foreign nationals enjoy private rights.
Article 3-2 If the person did not have mental capacity, the juridical act is void.
";

    #[test]
    fn segments_consecutive_articles() {
        let arts = parse_civil_code(TWO_ARTICLES).unwrap();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[0].id, "3");
        assert_eq!(arts[0].summary_line, "(Enjoyment of Private Rights)");
        assert_eq!(
            arts[0].content,
            "(1) The enjoyment of private rights commences at birth.\n\
             (2) Unless otherwise prohibited, foreign nationals enjoy private rights."
        );
        assert_eq!(arts[1].id, "3-2");
        assert_eq!(arts[1].summary_line, "");
        assert_eq!(arts[1].section, "Section 1 Capacity to Hold Rights");
        assert_eq!(count_article_markers(TWO_ARTICLES), 2);
    }

    #[test]
    fn body_before_article_is_error() {
        let err = parse_civil_code("Part I General\nstray text\nArticle 1 Body.").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_article_body_is_error() {
        assert!(parse_civil_code("Article 1\nArticle 2 Body.").is_err());
        assert!(parse_civil_code("Article 1 Body.\nArticle 2").is_err());
    }

    #[test]
    fn higher_headings_reset_lower_context() {
        let raw = "Part I A\nChapter I B\nSection 1 C\nArticle 1 x.\nPart II D\nArticle 2 y.";
        let arts = parse_civil_code(raw).unwrap();
        assert_eq!(arts[1].part, "Part II D");
        assert_eq!(arts[1].chapter, "");
        assert_eq!(arts[1].section, "");
    }

    #[test]
    fn trailing_parenthetical_without_article_is_body() {
        let raw = "Article 1 First.\n(see also the next part)\nChapter II Next\nArticle 2 Second.";
        let arts = parse_civil_code(raw).unwrap();
        assert_eq!(arts[0].content, "First.\n(see also the next part)");
        assert_eq!(arts[1].summary_line, "");
    }

    #[test]
    fn prose_starting_with_heading_word_is_body() {
        let raw = "Article 1 First line.\nPart of the claim survives.";
        let arts = parse_civil_code(raw).unwrap();
        assert_eq!(arts[0].content, "First line.\nPart of the claim survives.");
    }
}
