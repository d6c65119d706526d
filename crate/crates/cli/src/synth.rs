//! Deterministic synthetic corpora with known gold.
//!
//! Case documents mix fact paragraphs with reasoning blocks: a reasoning
//! paragraph followed by a one-sentence conclusion that opens with a marker
//! ("Therefore", ...). Every block owns a few key tokens. Supports are
//! mutual. A supporting pair of cases gets fresh keys and each side gains a
//! block built on them in its own words, so the pair is visible lexically and
//! to a pair scorer trained on the marker structure. Each pair also gets a
//! near-miss: one side shares a fact paragraph's rare tokens with a case
//! outside its gold set. BM25 sees the same overlap there, while the pair
//! scorer has never seen those tokens in a marker-linked pair.
//!
//! Statute articles are topic sentences with their own keys, and questions
//! restate one or two articles, optionally negated (label No).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use legalir_core::corpus::{
    write_articles_jsonl, write_cases_jsonl, write_jsonl, write_questions_jsonl, Answer, BarQuestion, CaseDocument,
    CaseQuery, FragmentQuery, SentenceSplitter, StatuteArticle,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

const SYLLABLES: [&str; 20] = [
    "ba", "ce", "di", "fo", "gu", "ka", "le", "mi", "no", "pu", "ra", "se", "ti", "vo", "zu", "ha", "je", "ly", "qo", "wi",
];
const SYLLABLES_PER_WORD: u32 = 4;
const TOPICS: usize = 8;
const TOPIC_WORDS: usize = 200;
const GENERAL_WORDS: usize = 400;
const KEYS_PER_BLOCK: usize = 6;
const NATIVE_BLOCKS: usize = 2;
const KEYS_PER_ARTICLE: usize = 3;

const MARKERS: [&str; 3] = ["Therefore", "Accordingly", "Consequently"];
const AUXILIARIES: [&str; 4] = ["shall", "may", "must", "can"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_cases: usize,
    /// Inclusive range of fact paragraphs per case, before reasoning blocks.
    pub paragraphs_per_case: (usize, usize),
    /// Probability that a given unordered pair of cases supports each other.
    pub planted_support_rate: f64,
    pub vocab_size: usize,
    pub seed: u64,
    pub n_articles: usize,
    pub n_questions: usize,
    /// Cap on the number of Task 2 fragments, one per planted support.
    pub n_fragments: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_cases: 100,
            paragraphs_per_case: (4, 8),
            planted_support_rate: 0.05,
            vocab_size: 12000,
            seed: 0,
            n_articles: 200,
            n_questions: 50,
            n_fragments: 100,
        }
    }
}

impl SyntheticSpec {
    /// Words needed before any support is planted; each support takes
    /// another [`KEYS_PER_BLOCK`], checked while generating.
    fn required_vocab(&self) -> usize {
        TOPICS * TOPIC_WORDS
            + GENERAL_WORDS
            + self.n_cases * NATIVE_BLOCKS * KEYS_PER_BLOCK
            + self.n_articles * KEYS_PER_ARTICLE
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, message: String| Err(CliError::value(key, message));
        if !(0.0..=1.0).contains(&self.planted_support_rate) {
            return bad("planted_support_rate", format!("{} outside [0, 1]", self.planted_support_rate));
        }
        if self.n_cases < 1 {
            return bad("n_cases", "must be at least 1".into());
        }
        let (lo, hi) = self.paragraphs_per_case;
        if lo < 1 || hi < lo {
            return bad("paragraphs_per_case", format!("invalid range {lo}..={hi}"));
        }
        if self.n_questions > 0 && self.n_articles == 0 {
            return bad("n_articles", "questions need at least one article".into());
        }
        let max_vocab = SYLLABLES.len().pow(SYLLABLES_PER_WORD);
        if self.vocab_size < self.required_vocab() || self.vocab_size > max_vocab {
            return bad(
                "vocab_size",
                format!("must lie in {}..={max_vocab} for this spec, got {}", self.required_vocab(), self.vocab_size),
            );
        }
        Ok(())
    }
}

/// Counts recorded while planting gold, independent of the output files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldLedger {
    pub support_pairs: Vec<(String, String)>,
    pub near_miss_pairs: Vec<(String, String)>,
    pub fragment_count: usize,
    pub question_article_pairs: usize,
    pub yes_questions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub cases: Vec<CaseDocument>,
    pub case_queries: Vec<CaseQuery>,
    pub fragments: Vec<FragmentQuery>,
    pub articles: Vec<StatuteArticle>,
    pub questions: Vec<BarQuestion>,
    pub ledger: GoldLedger,
}

/// File names written by [`SyntheticCorpus::write_to_dir`].
pub const SYNTH_FILES: [&str; 7] = [
    "cases.jsonl",
    "case_queries.jsonl",
    "fragments.jsonl",
    "articles.jsonl",
    "questions.jsonl",
    "civil_code.txt",
    "ledger.json",
];

impl SyntheticCorpus {
    /// Every corpus file in [`SYNTH_FILES`] order.
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut files: Vec<(&'static str, Vec<u8>)> = Vec::new();
        let mut b = Vec::new();
        write_cases_jsonl(&mut b, &self.cases).expect("vec write");
        files.push(("cases.jsonl", b));
        let mut b = Vec::new();
        write_jsonl(&mut b, &self.case_queries).expect("vec write");
        files.push(("case_queries.jsonl", b));
        let mut b = Vec::new();
        write_jsonl(&mut b, &self.fragments).expect("vec write");
        files.push(("fragments.jsonl", b));
        let mut b = Vec::new();
        write_articles_jsonl(&mut b, &self.articles).expect("vec write");
        files.push(("articles.jsonl", b));
        let mut b = Vec::new();
        write_questions_jsonl(&mut b, &self.questions).expect("vec write");
        files.push(("questions.jsonl", b));
        files.push(("civil_code.txt", render_civil_code(&self.articles).into_bytes()));
        let mut b = serde_json::to_vec_pretty(&self.ledger).expect("ledger serializes");
        b.push(b'\n');
        files.push(("ledger.json", b));
        files
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<(), CliError> {
        for (name, bytes) in self.files() {
            crate::run::write_atomic(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}

/// Lays articles out in the plain-text Civil Code format, one heading block
/// per change of part, chapter or section.
pub fn render_civil_code(articles: &[StatuteArticle]) -> String {
    let mut out = String::new();
    let (mut part, mut chapter, mut section) = (None, None, None);
    for a in articles {
        if part != Some(&a.part) {
            let _ = writeln!(out, "{}", a.part);
            part = Some(&a.part);
            chapter = None;
            section = None;
        }
        if !a.chapter.is_empty() && chapter != Some(&a.chapter) {
            let _ = writeln!(out, "{}", a.chapter);
            chapter = Some(&a.chapter);
            section = None;
        }
        if !a.section.is_empty() && section != Some(&a.section) {
            let _ = writeln!(out, "{}", a.section);
            section = Some(&a.section);
        }
        if !a.summary_line.is_empty() {
            let _ = writeln!(out, "{}", a.summary_line);
        }
        let _ = writeln!(out, "Article {} {}", a.id, a.content);
    }
    out
}

fn word(mut i: usize) -> String {
    let mut s = String::new();
    for _ in 0..SYLLABLES_PER_WORD {
        s.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
    }
    s
}

fn roman(mut n: usize) -> String {
    const TABLE: [(usize, &str); 9] =
        [(100, "C"), (90, "XC"), (50, "L"), (40, "XL"), (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")];
    let mut s = String::new();
    for (v, r) in TABLE {
        while n >= v {
            s.push_str(r);
            n -= v;
        }
    }
    s
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct Lexicon {
    topics: Vec<Vec<String>>,
    general: Vec<String>,
    keys: std::vec::IntoIter<String>,
}

impl Lexicon {
    fn new(rng: &mut ChaCha8Rng, vocab_size: usize) -> Self {
        let mut words: Vec<String> = (0..vocab_size).map(word).collect();
        words.shuffle(rng);
        let topics = (0..TOPICS)
            .map(|t| words[t * TOPIC_WORDS..(t + 1) * TOPIC_WORDS].to_vec())
            .collect();
        let start = TOPICS * TOPIC_WORDS;
        let general = words[start..start + GENERAL_WORDS].to_vec();
        let keys = words.split_off(start + GENERAL_WORDS).into_iter();
        Self { topics, general, keys }
    }

    fn take_keys(&mut self, n: usize) -> Result<Vec<String>, CliError> {
        (0..n)
            .map(|_| {
                self.keys
                    .next()
                    .ok_or_else(|| CliError::value("vocab_size", "too small for the planted supports"))
            })
            .collect()
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, from: &'a [String], n: usize) -> Vec<&'a str> {
    from.choose_multiple(rng, n).map(String::as_str).collect()
}

fn sentence(words: Vec<&str>) -> String {
    format!("{}.", capitalize(&words.join(" ")))
}

fn shuffled<'a>(rng: &mut ChaCha8Rng, mut words: Vec<&'a str>) -> Vec<&'a str> {
    words.shuffle(rng);
    words
}

fn fact_paragraph(rng: &mut ChaCha8Rng, lex: &Lexicon, topic: usize, keys: &[&str]) -> String {
    let n = rng.gen_range(2..=3);
    let mut sentences = Vec::with_capacity(n);
    for s in 0..n {
        let mut w = pick(rng, &lex.topics[topic], 3);
        w.extend(pick(rng, &lex.general, 4));
        if s == 0 {
            w.extend(keys.iter().copied());
        }
        sentences.push(sentence(shuffled(rng, w)));
    }
    sentences.join(" ")
}

fn reasoning_paragraph(rng: &mut ChaCha8Rng, lex: &Lexicon, topic: usize, keys: &[String]) -> String {
    let mut first: Vec<&str> = keys.iter().map(String::as_str).collect();
    first.extend(pick(rng, &lex.topics[topic], 2));
    first.extend(pick(rng, &lex.general, 2));
    let mut second = pick(rng, &lex.topics[topic], 3);
    second.extend(pick(rng, &lex.general, 3));
    format!("{} {}", sentence(shuffled(rng, first)), sentence(shuffled(rng, second)))
}

fn conclusion_paragraph(rng: &mut ChaCha8Rng, lex: &Lexicon, topic: usize, keys: &[String]) -> String {
    let marker = MARKERS[rng.gen_range(0..MARKERS.len())];
    let mut w: Vec<&str> = keys.iter().map(String::as_str).collect();
    w.extend(pick(rng, &lex.topics[topic], 2));
    w.extend(pick(rng, &lex.general, 2));
    format!("{marker}, {}.", shuffled(rng, w).join(" "))
}

enum Item {
    Fact(String),
    Block(String, String),
}

struct CasePlan {
    topic: usize,
    items: Vec<Item>,
}

/// Builds the whole synthetic corpus. Equal specs give equal corpora.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus, CliError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut lex = Lexicon::new(&mut rng, spec.vocab_size);
    let mut ledger = GoldLedger::default();
    let ids: Vec<String> = (0..spec.n_cases).map(|i| format!("case{i:04}")).collect();

    let mut plans: Vec<CasePlan> = (0..spec.n_cases)
        .map(|_| -> Result<CasePlan, CliError> {
            let topic = rng.gen_range(0..TOPICS);
            let (lo, hi) = spec.paragraphs_per_case;
            let facts = rng.gen_range(lo..=hi);
            let mut items: Vec<Item> = (0..facts).map(|_| Item::Fact(fact_paragraph(&mut rng, &lex, topic, &[]))).collect();
            for _ in 0..NATIVE_BLOCKS {
                let keys = lex.take_keys(KEYS_PER_BLOCK)?;
                let block = Item::Block(reasoning_paragraph(&mut rng, &lex, topic, &keys), conclusion_paragraph(&mut rng, &lex, topic, &keys));
                let at = rng.gen_range(0..=items.len());
                items.insert(at, block);
            }
            Ok(CasePlan { topic, items })
        })
        .collect::<Result<_, CliError>>()?;

    // Supports are mutual: one draw per unordered pair, gold both ways.
    let mut gold: Vec<BTreeSet<String>> = vec![BTreeSet::new(); spec.n_cases];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..spec.n_cases {
        for b in a + 1..spec.n_cases {
            if rng.gen_bool(spec.planted_support_rate) {
                gold[a].insert(ids[b].clone());
                gold[b].insert(ids[a].clone());
                pairs.push((a, b));
            }
        }
    }
    let mut planted: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for (a, b) in pairs {
        let keys = lex.take_keys(KEYS_PER_BLOCK)?;
        for side in [a, b] {
            let topic = plans[side].topic;
            let block = Item::Block(
                reasoning_paragraph(&mut rng, &lex, topic, &keys),
                conclusion_paragraph(&mut rng, &lex, topic, &keys),
            );
            let at = rng.gen_range(0..=plans[side].items.len());
            plans[side].items.insert(at, block);
        }
        ledger.support_pairs.push((ids[a].clone(), ids[b].clone()));
        ledger.support_pairs.push((ids[b].clone(), ids[a].clone()));

        // A shared fact pattern with a case outside a's gold set.
        let others: Vec<usize> = (0..spec.n_cases).filter(|&d| d != a && !gold[a].contains(&ids[d])).collect();
        if let Some(&d) = others.choose(&mut rng) {
            let fact_keys = lex.take_keys(KEYS_PER_BLOCK)?;
            let shared: Vec<&str> = fact_keys.iter().map(String::as_str).collect();
            for side in [a, d] {
                let para = fact_paragraph(&mut rng, &lex, plans[side].topic, &shared);
                let at = rng.gen_range(0..=plans[side].items.len());
                plans[side].items.insert(at, Item::Fact(para));
            }
            ledger.near_miss_pairs.push((ids[a].clone(), ids[d].clone()));
        }
        planted.push((a, b, keys));
    }

    let splitter = SentenceSplitter::default();
    let mut cases = Vec::with_capacity(spec.n_cases);
    for (id, plan) in ids.iter().zip(&plans) {
        let mut paras = Vec::new();
        for item in &plan.items {
            match item {
                Item::Fact(p) => paras.push(p.clone()),
                Item::Block(r, c) => {
                    paras.push(r.clone());
                    paras.push(c.clone());
                }
            }
        }
        cases.push(CaseDocument::new(id.clone(), paras, &splitter).map_err(CliError::from)?);
    }

    let case_queries = (0..spec.n_cases)
        .map(|i| CaseQuery {
            query_id: ids[i].clone(),
            candidates: ids.iter().filter(|c| **c != ids[i]).cloned().collect(),
            gold: gold[i].clone(),
        })
        .collect();

    // One fragment per planted pair: its holding restated without a marker.
    // Gold is every paragraph of the second case that carries all its keys.
    let mut fragments = Vec::new();
    for (n, (base, cand, keys)) in planted.iter().take(spec.n_fragments).enumerate() {
        let doc = &cases[*cand];
        let support: BTreeSet<String> = doc
            .paragraphs
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let text = p.text.to_lowercase();
                keys.iter().all(|k| text.contains(k.as_str()))
            })
            .map(|(i, _)| i.to_string())
            .collect();
        let mut w: Vec<&str> = keys.iter().map(String::as_str).collect();
        w.extend(pick(&mut rng, &lex.topics[plans[*base].topic], 2));
        fragments.push(FragmentQuery {
            query_id: format!("frag{n:04}"),
            case_id: ids[*cand].clone(),
            fragment: sentence([vec!["the", "court", "holds", "that"], shuffled(&mut rng, w)].concat()),
            gold: support,
        });
    }
    ledger.fragment_count = fragments.len();

    let (articles, article_keys) = generate_articles(&mut rng, &mut lex, spec.n_articles)?;
    let questions = generate_questions(&mut rng, &lex, &articles, &article_keys, spec.n_questions, &mut ledger);

    Ok(SyntheticCorpus {
        cases,
        case_queries,
        fragments,
        articles,
        questions,
        ledger,
    })
}

struct ArticleKeys {
    topic: usize,
    aux: &'static str,
    keys: Vec<String>,
}

fn generate_articles(
    rng: &mut ChaCha8Rng,
    lex: &mut Lexicon,
    n: usize,
) -> Result<(Vec<StatuteArticle>, Vec<ArticleKeys>), CliError> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let topic = i * TOPICS / n.max(1);
        let keys = lex.take_keys(KEYS_PER_ARTICLE)?;
        let aux = AUXILIARIES[rng.gen_range(0..AUXILIARIES.len())];
        let tw = pick(rng, &lex.topics[topic], 3);
        let gw = pick(rng, &lex.general, 2);
        let first = format!("A {} {} {aux} {} the {} of the {}.", tw[0], keys[0], gw[0], keys[1], tw[1]);
        let second = format!("The {} {} {aux} be {} by the {}.", keys[2], tw[2], gw[1], tw[0]);
        let chapter_no = i % 3 + 1;
        let article = StatuteArticle {
            id: (i + 1).to_string(),
            part: format!("Part {} {}", roman(topic + 1), capitalize(&lex.topics[topic][0])),
            chapter: format!("Chapter {} {}", roman(chapter_no), capitalize(&lex.topics[topic][chapter_no])),
            section: format!("Section {} General Provisions", i % 2 + 1),
            summary_line: format!("({} {})", capitalize(tw[0]), keys[0]),
            content: format!("{first} {second}"),
        };
        out.push(((topic, chapter_no, i % 2, i), article, ArticleKeys { topic, aux, keys }));
    }
    // Grouped by part, chapter and section so the rendered text has one
    // heading per group.
    out.sort_by_key(|(order, _, _)| *order);
    Ok(out.into_iter().map(|(_, a, m)| (a, m)).unzip())
}

fn generate_questions(
    rng: &mut ChaCha8Rng,
    lex: &Lexicon,
    articles: &[StatuteArticle],
    meta: &[ArticleKeys],
    n: usize,
    ledger: &mut GoldLedger,
) -> Vec<BarQuestion> {
    let mut out = Vec::with_capacity(n);
    for q in 0..n {
        let count = if rng.gen_bool(0.2) { 2 } else { 1 };
        let picked: Vec<usize> = (0..articles.len()).collect::<Vec<_>>().choose_multiple(rng, count).copied().collect();
        let hard = rng.gen_bool(0.3);
        let negate = rng.gen_bool(0.5);
        let first = &meta[picked[0]];
        let mut w: Vec<&str> = Vec::new();
        for &a in &picked {
            let m = &meta[a];
            let take = if hard { 1 } else { 2 };
            w.extend(m.keys.iter().take(take).map(String::as_str));
        }
        w.extend(pick(rng, &lex.topics[first.topic], if hard { 3 } else { 1 }));
        w.extend(pick(rng, &lex.general, 2));
        let w = shuffled(rng, w);
        let split = w.len() / 2;
        let content = format!(
            "A {} {}{} {}.",
            w[..split].join(" "),
            first.aux,
            if negate { " not" } else { "" },
            w[split..].join(" ")
        );
        let gold: BTreeSet<String> = picked.iter().map(|&a| articles[a].id.clone()).collect();
        ledger.question_article_pairs += gold.len();
        if !negate {
            ledger.yes_questions += 1;
        }
        out.push(BarQuestion {
            id: format!("S{:02}-{}", q / 10 + 1, q % 10 + 1),
            content,
            relevant_article_ids: gold,
            label: Some(if negate { Answer::No } else { Answer::Yes }),
        });
    }
    out
}
