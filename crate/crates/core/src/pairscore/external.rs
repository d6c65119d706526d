use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{PairRef, PairScoreError, PairScorer};

/// Scores produced outside this crate (e.g. by a neural model), keyed by
/// `(query_id, candidate_id)`.
///
/// File format: `query_id<TAB>candidate_id<TAB>score`, UTF-8, one entry per
/// line, no header.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScoreTable {
    scores: HashMap<String, HashMap<String, f64>>,
    len: usize,
    default_score: f64,
}

impl Default for ExternalScoreTable {
    fn default() -> Self {
        Self {
            scores: HashMap::new(),
            len: 0,
            default_score: 0.0,
        }
    }
}

impl ExternalScoreTable {
    pub fn new(default_score: f64) -> Result<Self, PairScoreError> {
        check_unit(default_score, None)?;
        Ok(Self {
            default_score,
            ..Default::default()
        })
    }

    pub fn insert(&mut self, query_id: &str, candidate_id: &str, score: f64) -> Result<(), PairScoreError> {
        check_unit(score, None)?;
        let prev = self
            .scores
            .entry(query_id.to_string())
            .or_default()
            .insert(candidate_id.to_string(), score);
        if prev.is_none() {
            self.len += 1;
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str, candidate_id: &str) -> Option<f64> {
        self.scores.get(query_id)?.get(candidate_id).copied()
    }

    pub fn default_score(&self) -> f64 {
        self.default_score
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn parse<R: BufRead>(reader: R, default_score: f64) -> Result<Self, PairScoreError> {
        let mut table = Self::new(default_score)?;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| PairScoreError::parse(line_no, e.to_string()))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [query, candidate, raw] = fields[..] else {
                return Err(PairScoreError::parse(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            if query.is_empty() || candidate.is_empty() {
                return Err(PairScoreError::parse(line_no, "empty id"));
            }
            let score: f64 = raw
                .trim()
                .parse()
                .map_err(|_| PairScoreError::parse(line_no, format!("bad score {raw:?}")))?;
            check_unit(score, Some(line_no))?;
            if table.get(query, candidate).is_some() {
                return Err(PairScoreError::parse(line_no, format!("duplicate entry ({query}, {candidate})")));
            }
            table.insert(query, candidate, score)?;
        }
        Ok(table)
    }

    /// Entries sorted by `(query_id, candidate_id)`.
    pub fn entries(&self) -> Vec<(&str, &str, f64)> {
        let mut out: Vec<(&str, &str, f64)> = self
            .scores
            .iter()
            .flat_map(|(q, m)| m.iter().map(move |(c, &s)| (q.as_str(), c.as_str(), s)))
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (q, c, s) in self.entries() {
            writeln!(w, "{q}\t{c}\t{s}")?;
        }
        Ok(())
    }
}

fn check_unit(score: f64, line: Option<usize>) -> Result<(), PairScoreError> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(PairScoreError::Range { line, value: score })
    }
}

impl PairScorer for ExternalScoreTable {
    fn score(&self, pair: &PairRef<'_>) -> f64 {
        self.get(pair.query_id, pair.candidate_id).unwrap_or(self.default_score)
    }

    fn covers(&self, pair: &PairRef<'_>) -> bool {
        self.get(pair.query_id, pair.candidate_id).is_some()
    }
}

/// Loads an external score file with default score 0.0.
pub fn load_external_scores(path: &Path) -> Result<ExternalScoreTable, PairScoreError> {
    let file = fs::File::open(path).map_err(|e| PairScoreError::Io(format!("{}: {e}", path.display())))?;
    ExternalScoreTable::parse(BufReader::new(file), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair<'a>(q: &'a str, c: &'a str) -> PairRef<'a> {
        PairRef::ids(q, c)
    }

    #[test]
    fn single_entry_and_default() {
        let t = ExternalScoreTable::parse("q1\tc1\t0.73\n".as_bytes(), 0.0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.score(&pair("q1", "c1")), 0.73);
        assert_eq!(t.score(&pair("q1", "c2")), 0.0);
        assert!(!t.covers(&pair("q1", "c2")));
    }

    #[test]
    fn out_of_range_score() {
        let err = ExternalScoreTable::parse("q1\tc1\t1.5\n".as_bytes(), 0.0).unwrap_err();
        assert!(matches!(err, PairScoreError::Range { line: Some(1), .. }), "{err}");
        assert!(ExternalScoreTable::parse("q1\tc1\tNaN\n".as_bytes(), 0.0).is_err());
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let err = ExternalScoreTable::parse("q1\tc1\t0.5\nq2 c2 0.5\n".as_bytes(), 0.0).unwrap_err();
        assert!(matches!(err, PairScoreError::Parse { line: 2, .. }), "{err}");
        let err = ExternalScoreTable::parse("q1\tc1\tx\n".as_bytes(), 0.0).unwrap_err();
        assert!(matches!(err, PairScoreError::Parse { line: 1, .. }));
        let err = ExternalScoreTable::parse("q1\tc1\t0.1\nq1\tc1\t0.2\n".as_bytes(), 0.0).unwrap_err();
        assert!(matches!(err, PairScoreError::Parse { line: 2, .. }));
    }

    #[test]
    fn tsv_round_trip() {
        let mut t = ExternalScoreTable::new(0.0).unwrap();
        t.insert("q2", "c1", 0.25).unwrap();
        t.insert("q1", "c9", 1.0).unwrap();
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "q1\tc9\t1\nq2\tc1\t0.25\n");
        assert_eq!(ExternalScoreTable::parse(buf.as_slice(), 0.0).unwrap(), t);
    }
}
