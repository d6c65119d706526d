use std::collections::BTreeSet;

use legalir_core::corpus::{parse_civil_code, Answer, BarQuestion, StatuteArticle};
use legalir_core::entail::{answer_entailment, build_entailment_pairs, vocab_overlap, EntailmentPair, NegationLexicon};
use legalir_core::lexical::{TfidfModel, TokenizerConfig};
use legalir_core::pairscore::{ExternalScoreTable, PairLabel};
use legalir_core::pipelines::{
    ensemble_or, normalize_scores, run_task2, run_task3, FusionConfig, LexicalSource, Normalization,
};
use proptest::prelude::*;

fn ranking_by(ids: &[String], key: &[f64]) -> Vec<String> {
    let mut order: Vec<(String, f64)> = ids.iter().cloned().zip(key.iter().copied()).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    order.into_iter().map(|(id, _)| id).collect()
}

proptest! {
    #[test]
    fn fusion_endpoints_reproduce_component_rankings(
        lexical in prop::collection::vec(0u8..20, 1..12),
        supporting in prop::collection::vec(0u8..20, 12),
    ) {
        let n = lexical.len();
        let ids: Vec<String> = (0..n).map(|i| format!("p{i:02}")).collect();
        let lex: Vec<f64> = lexical.iter().map(|&v| v as f64 / 19.0).collect();
        let sup: Vec<f64> = supporting[..n].iter().map(|&v| v as f64 / 19.0).collect();
        let mut lex_table = ExternalScoreTable::new(0.0).unwrap();
        let mut sup_table = ExternalScoreTable::new(0.0).unwrap();
        for i in 0..n {
            lex_table.insert("f", &ids[i], lex[i]).unwrap();
            sup_table.insert("f", &ids[i], sup[i]).unwrap();
        }
        let cands: Vec<(String, String)> = ids.iter().map(|id| (id.clone(), format!("text {id}"))).collect();
        for (alpha, key) in [(0.0, &lex), (1.0, &sup)] {
            let cfg = FusionConfig { alpha, top_n: n, ..Default::default() };
            let r = run_task2("f", "fragment", &cands, &sup_table, &LexicalSource::External(&lex_table), &cfg).unwrap();
            let got: Vec<String> = r.ranked_ids().iter().map(|s| s.to_string()).collect();
            prop_assert_eq!(got, ranking_by(&ids, key));
        }
    }

    #[test]
    fn minmax_stays_in_unit_interval(raw in prop::collection::btree_map("[a-e]{1,3}", -50.0f64..50.0, 1..10)) {
        let n = normalize_scores(&raw, Normalization::MinmaxPerQuery).unwrap();
        prop_assert!(n.values().all(|v| (0.0..=1.0).contains(v)));
        let distinct: BTreeSet<u64> = raw.values().map(|v| v.to_bits()).collect();
        if distinct.len() == 1 {
            prop_assert!(n.values().all(|&v| v == 1.0));
        } else {
            prop_assert!(n.values().any(|&v| v == 0.0) && n.values().any(|&v| v == 1.0));
        }
    }

    #[test]
    fn ensemble_is_superset_of_members(members in prop::collection::vec(prop::collection::btree_set(0u16..40, 0..10), 1..5)) {
        let union = ensemble_or(&members).unwrap();
        for m in &members {
            prop_assert!(m.is_subset(&union));
        }
        prop_assert!(union.iter().all(|x| members.iter().any(|m| m.contains(x))));
    }

    #[test]
    fn vocab_overlap_partitions_both_sets(
        a in prop::collection::btree_set("[a-h]{1,2}", 0..20),
        b in prop::collection::btree_set("[a-h]{1,2}", 0..20),
    ) {
        let o = vocab_overlap(&a, &b);
        prop_assert_eq!(o.shared + o.only_a, a.len());
        prop_assert_eq!(o.shared + o.only_b, b.len());
    }

    #[test]
    fn negation_is_an_involution(
        subject in prop::sample::select(vec!["The obligor", "A person", "The court", "Such holder"]),
        aux in prop::sample::select(vec!["shall", "may", "must", "can", "is"]),
        negated in any::<bool>(),
        rest in prop::sample::select(vec!["perform the obligation.", "claim damages.", "be liable.", "act"]),
    ) {
        let s = format!("{subject} {aux}{} {rest}", if negated { " not" } else { "" });
        let lex = NegationLexicon::default();
        let once = lex.negate(&s).unwrap();
        prop_assert_ne!(&once, &s);
        prop_assert_eq!(lex.negate(&once).unwrap(), s);
    }
}

fn pair_with(verdict: PairLabel, i: usize) -> EntailmentPair {
    EntailmentPair {
        question_id: "q".into(),
        article_id: i.to_string(),
        question_text: "q".into(),
        article_text: "a".into(),
        joined_text: "q [SEP] a".into(),
        predicted: Some(verdict),
    }
}

#[test]
fn entailment_answer_enumeration() {
    for n in 1..=3usize {
        for mask in 0..(1u32 << n) {
            let pairs: Vec<EntailmentPair> = (0..n)
                .map(|i| pair_with(if mask >> i & 1 == 1 { PairLabel::Positive } else { PairLabel::Negative }, i))
                .collect();
            let want = if mask != 0 { Answer::Yes } else { Answer::No };
            assert_eq!(answer_entailment(&pairs).unwrap(), want, "n={n} mask={mask:b}");
        }
    }
    assert!(answer_entailment(&[]).is_err());
}

fn articles(n: usize) -> Vec<StatuteArticle> {
    let topics = ["lien", "agent", "lease", "damages", "guarantee", "inheritance", "possession", "mortgage"];
    (0..n)
        .map(|i| StatuteArticle {
            id: (100 + i).to_string(),
            part: "Part I".into(),
            chapter: String::new(),
            section: String::new(),
            summary_line: String::new(),
            content: format!("{} {} rule number{i}", topics[i % topics.len()], topics[(i * 3 + 1) % topics.len()]),
        })
        .collect()
}

fn fitted(arts: &[StatuteArticle]) -> TfidfModel {
    let texts: Vec<String> = arts.iter().map(StatuteArticle::retrieval_text).collect();
    TfidfModel::fit(&texts, &TokenizerConfig::default()).unwrap()
}

proptest! {
    #[test]
    fn task3_never_returns_empty(
        words in prop::collection::vec(prop::sample::select(vec!["lien", "agent", "lease", "zzz", "mortgage", "the"]), 1..6),
        k in 1usize..30,
        positives in prop::collection::btree_set(100usize..120, 0..4),
    ) {
        let arts = articles(20);
        let model = fitted(&arts);
        let q = BarQuestion { id: "q".into(), content: words.join(" "), relevant_article_ids: BTreeSet::new(), label: None };
        let mut table = ExternalScoreTable::new(0.0).unwrap();
        for p in &positives {
            table.insert("q", &p.to_string(), 1.0).unwrap();
        }
        let pred = run_task3(&q, &arts, &model, k, &[&table], 0.5).unwrap();
        prop_assert!(!pred.selected.is_empty());
        prop_assert!(pred.candidates.len() == k.min(arts.len()));
        let cand_ids: BTreeSet<&str> = pred.candidates.iter().map(|c| c.id.as_str()).collect();
        prop_assert!(pred.selected.iter().all(|s| cand_ids.contains(s.as_str())));
    }

    #[test]
    fn entailment_pairs_cover_gold_once(
        gold in prop::collection::btree_set(100usize..112, 0..5),
        words in prop::collection::vec(prop::sample::select(vec!["lien", "agent", "lease", "damages", "guarantee"]), 1..5),
    ) {
        let arts = articles(12);
        let model = fitted(&arts);
        let gold: BTreeSet<String> = gold.iter().map(|g| g.to_string()).collect();
        let q = BarQuestion { id: "q".into(), content: words.join(" "), relevant_article_ids: gold.clone(), label: None };
        let pairs = build_entailment_pairs(&q, &gold, &model, &arts).unwrap();
        prop_assert!(pairs.len() <= gold.len() + 2);
        for g in &gold {
            prop_assert_eq!(pairs.iter().filter(|p| &p.article_id == g).count(), 1);
        }
        let ids: BTreeSet<&str> = pairs.iter().map(|p| p.article_id.as_str()).collect();
        prop_assert_eq!(ids.len(), pairs.len());
        prop_assert!(pairs[..gold.len()].iter().all(|p| gold.contains(&p.article_id)));
    }
}

#[test]
fn article_303_fields() {
    let raw = "Part II Real Rights\n\
Chapter VIII Statutory Liens\n\
Section 1 General Provisions\n\
(Content of Statutory Liens)\n\
Article 303 The holder of a statutory lien has the rights to have that holder's own claim satisfied prior to other obligees out of the assets of the relevant obligor in accordance with the provisions of laws including this Act.\n";
    let arts = parse_civil_code(raw).unwrap();
    assert_eq!(arts.len(), 1);
    let a = &arts[0];
    assert_eq!(a.id, "303");
    assert_eq!(a.part, "Part II Real Rights");
    assert_eq!(a.chapter, "Chapter VIII Statutory Liens");
    assert_eq!(a.section, "Section 1 General Provisions");
    assert_eq!(a.summary_line, "(Content of Statutory Liens)");
    assert!(a.content.starts_with("The holder of a statutory lien has the rights"));
    assert!(a.content.ends_with("including this Act."));
}
