use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::data::labels::{COMMA, OUTSIDE, PERIOD, QUESTION};
use crate::data::{synth_generate, GrammarConfig, LabelScheme, TokenSequence};
use crate::decoding::Revision;
use crate::error::Error;

fn seq(punct: &[&str], disf: &[&str]) -> TokenSequence {
    let words = (0..punct.len()).map(|i| format!("w{i}")).collect();
    TokenSequence::labeled(
        words,
        punct.iter().map(|s| s.to_string()).collect(),
        disf.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

#[test]
fn hand_counted_example() {
    let gold = seq(&[PERIOD, OUTSIDE, COMMA], &["O"; 3]);
    let pred = seq(&[PERIOD, COMMA, COMMA], &["O"; 3]);
    let r = score(&[pred], &[gold], &LabelScheme::standard()).unwrap();
    let period = r.punct_class(PERIOD).unwrap();
    assert_eq!((period.precision(), period.recall()), (1.0, 1.0));
    let comma = r.punct_class(COMMA).unwrap();
    assert_eq!((comma.precision(), comma.recall()), (0.5, 1.0));
    assert!((comma.f1() - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.punct_overall.precision() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.punct_overall.recall(), 1.0);
}

#[test]
fn perfect_prediction_scores_one() {
    let gold = synth_generate(3, 50, &GrammarConfig::default()).unwrap();
    let r = score(&gold, &gold, &LabelScheme::standard()).unwrap();
    for c in &r.punct {
        if c.counts.tp > 0 {
            assert_eq!(c.f1(), 1.0);
        }
    }
    for c in [r.punct_overall, r.interregnum, r.reparandum, r.either] {
        assert_eq!(c.f1(), 1.0);
    }
}

#[test]
fn all_outside_prediction_recalls_nothing() {
    let gold = synth_generate(4, 30, &GrammarConfig::default()).unwrap();
    let pred: Vec<TokenSequence> = gold
        .iter()
        .map(|g| {
            let o = vec![OUTSIDE.to_string(); g.len()];
            TokenSequence::labeled(g.words().to_vec(), o.clone(), o).unwrap()
        })
        .collect();
    let r = score(&pred, &gold, &LabelScheme::standard()).unwrap();
    assert!(r.punct.iter().all(|c| c.recall() == 0.0));
    assert_eq!(r.punct_overall.f1(), 0.0);
    assert_eq!(r.either.recall(), 0.0);
}

#[test]
fn misaligned_input_is_rejected() {
    let a = seq(&[PERIOD], &["O"]);
    let b = seq(&[PERIOD, OUTSIDE], &["O", "O"]);
    let s = LabelScheme::standard();
    assert!(matches!(score(std::slice::from_ref(&a), &[b], &s), Err(Error::Eval(_))));
    assert!(matches!(score(std::slice::from_ref(&a), &[], &s), Err(Error::Eval(_))));
    assert!(matches!(score(&[a.strip_labels()], &[a], &s), Err(Error::Eval(_))));
}

#[test]
fn report_renders_table_and_pairs() {
    let gold = seq(&[PERIOD, OUTSIDE, QUESTION], &["B-RM", "B-IM", "O"]);
    let one = std::slice::from_ref(&gold);
    let r = score(one, one, &LabelScheme::standard()).unwrap();
    let table = r.to_table();
    assert!(table.contains("overall"));
    assert!(table.lines().count() == 1 + 3 + 4);
    let kv = r.to_kv();
    assert!(kv.contains("punct.PERIOD.f1=1\n"));
    assert!(kv.contains("disf.either.tp=2\n"));
}

#[test]
fn histogram_takes_the_max_per_stream() {
    let rev = |distance| Revision {
        step: 0,
        position: 0,
        distance,
        after_removal: false,
    };
    let logs: Vec<Vec<Revision>> = vec![vec![], vec![rev(2), rev(5)], vec![rev(5)], vec![rev(12)]];
    let h = position_change_histogram(logs.iter().map(Vec::as_slice));
    assert_eq!(h.total(), 4);
    assert_eq!((h.count(0), h.count(5), h.count(12)), (1, 2, 1));
    assert_eq!(h.mass_above(9), 1);
    assert_eq!(h.mass_above(12), 0);
    assert_eq!(h.max_bucket(), Some(12));
    assert_eq!(h.to_tsv(), "0\t1\n5\t2\n12\t1\n");
}

#[test]
fn median_of_durations() {
    let ms = Duration::from_millis;
    assert_eq!(median_duration(&[ms(5), ms(1), ms(3)]), ms(3));
    assert_eq!(median_duration(&[ms(4), ms(2)]), ms(3));
}

/// Tallies TP/FP/FN per class with a direct scan over flattened tokens.
fn brute_force(pred: &[TokenSequence], gold: &[TokenSequence]) -> Vec<(usize, usize, usize)> {
    let p: Vec<(&String, &String)> = pred
        .iter()
        .flat_map(|s| s.punct().unwrap().iter().zip(s.disf().unwrap()))
        .collect();
    let g: Vec<(&String, &String)> = gold
        .iter()
        .flat_map(|s| s.punct().unwrap().iter().zip(s.disf().unwrap()))
        .collect();
    let tally = |hit: &dyn Fn(&(&String, &String)) -> bool| {
        let mut c = (0, 0, 0);
        for (a, b) in p.iter().zip(&g) {
            match (hit(a), hit(b)) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                _ => {}
            }
        }
        c
    };
    let mut out = Vec::new();
    for class in [COMMA, PERIOD, QUESTION] {
        out.push(tally(&|t| t.0 == class));
    }
    let mut overall = (0, 0, 0);
    for (a, b) in p.iter().zip(&g) {
        if a.0 != OUTSIDE && a.0 == b.0 {
            overall.0 += 1;
        }
        if a.0 != OUTSIDE && a.0 != b.0 {
            overall.1 += 1;
        }
        if b.0 != OUTSIDE && a.0 != b.0 {
            overall.2 += 1;
        }
    }
    out.push(overall);
    out.push(tally(&|t| t.1.ends_with("-IM")));
    out.push(tally(&|t| t.1.ends_with("-RM")));
    out.push(tally(&|t| t.1 != OUTSIDE));
    out
}

fn random_pair() -> impl Strategy<Value = (Vec<TokenSequence>, Vec<TokenSequence>)> {
    let punct = prop::sample::select(vec![OUTSIDE, COMMA, PERIOD, QUESTION]);
    let disf = prop::sample::select(vec!["O", "B-RM", "I-RM", "B-IM", "I-IM"]);
    let token = (punct.clone(), disf.clone(), punct, disf);
    prop::collection::vec(prop::collection::vec(token, 1..12), 1..6).prop_map(|utts| {
        let fix = |labels: Vec<&str>| {
            // Turn stray I- tags into B- tags so the sequence is valid BIO.
            let mut out: Vec<String> = Vec::new();
            for l in labels {
                let ok = l.strip_prefix("I-").is_none_or(|k| {
                    out.last().is_some_and(|p: &String| p.ends_with(k) && p != "O")
                });
                out.push(if ok { l.to_string() } else { l.replacen("I-", "B-", 1) });
            }
            out
        };
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for u in utts {
            let words: Vec<String> = (0..u.len()).map(|i| format!("w{i}")).collect();
            let pp = u.iter().map(|t| t.0.to_string()).collect();
            let gp = u.iter().map(|t| t.2.to_string()).collect();
            let pd = fix(u.iter().map(|t| t.1).collect());
            let gd = fix(u.iter().map(|t| t.3).collect());
            pred.push(TokenSequence::labeled(words.clone(), pp, pd).unwrap());
            gold.push(TokenSequence::labeled(words, gp, gd).unwrap());
        }
        (pred, gold)
    })
}

fn as_tuple(c: &Counts) -> (usize, usize, usize) {
    (c.tp, c.fp, c.fn_)
}

proptest! {
    #[test]
    fn matches_brute_force_counter((pred, gold) in random_pair()) {
        let r = score(&pred, &gold, &LabelScheme::standard()).unwrap();
        let expect = brute_force(&pred, &gold);
        let got: Vec<_> = r
            .punct
            .iter()
            .map(|c| as_tuple(&c.counts))
            .chain([&r.punct_overall, &r.interregnum, &r.reparandum, &r.either].map(as_tuple))
            .collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn utterance_order_is_irrelevant((pred, gold) in random_pair(), rot in 0usize..6) {
        let s = LabelScheme::standard();
        let k = rot % pred.len();
        let mut p2 = pred.clone();
        let mut g2 = gold.clone();
        p2.rotate_left(k);
        g2.rotate_left(k);
        prop_assert_eq!(score(&pred, &gold, &s).unwrap(), score(&p2, &g2, &s).unwrap());
    }

    #[test]
    fn micro_counts_are_class_sums((pred, gold) in random_pair()) {
        let r = score(&pred, &gold, &LabelScheme::standard()).unwrap();
        let tp: usize = r.punct.iter().map(|c| c.counts.tp).sum();
        let fp: usize = r.punct.iter().map(|c| c.counts.fp).sum();
        let fn_: usize = r.punct.iter().map(|c| c.counts.fn_).sum();
        prop_assert_eq!((tp, fp, fn_), as_tuple(&r.punct_overall));
    }
}
