mod common;
mod oracles;

use std::collections::BTreeSet;

use proptest::prelude::*;

use pipescore_core::corpus::split_corpus;
use pipescore_core::evaluation::{cohens_kappa, confusion_counts, metrics};
use pipescore_core::preprocess::{
    correct_spelling, detect_negation, normalize_text, tokenize, NegationTriggerSet, SentenceSplitter, SpellVocabulary,
};
use pipescore_core::rating::{assign_rating, WeightTable, WeightTriple};

use oracles::*;

fn words() -> impl Strategy<Value = Vec<String>> {
    let word = prop_oneof![
        Just("no".to_string()),
        Just("not".to_string()),
        Just("without".to_string()),
        Just("but".to_string()),
        Just("free".to_string()),
        Just("of".to_string()),
        Just("leaks".to_string()),
        Just("frequent".to_string()),
        "[a-z]{1,7}",
    ];
    prop::collection::vec(word, 0..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,60}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }

    #[test]
    fn sentence_spans_partition_text(s in "[A-Za-z0-9 .!?]{0,80}") {
        let text = normalize_text(&s);
        let spans = SentenceSplitter::default().sentence_spans(&text);
        let mut pos = 0;
        for span in &spans {
            prop_assert!(span.start >= pos && span.end > span.start);
            prop_assert!(text[pos..span.start].trim().is_empty());
            pos = span.end;
        }
        prop_assert!(text[pos..].trim().is_empty());
    }

    #[test]
    fn tokens_reconstruct_sentence(s in "[A-Za-z0-9 .!?]{0,60}") {
        let tokens = tokenize(&s);
        let mut pos = 0;
        for t in &tokens {
            prop_assert!(t.char_span.start >= pos && t.char_span.end > t.char_span.start);
            prop_assert_eq!(&s[t.char_span.start..t.char_span.end], t.surface.as_str());
            prop_assert!(s[pos..t.char_span.start].chars().all(char::is_whitespace));
            pos = t.char_span.end;
        }
        prop_assert!(s[pos..].chars().all(char::is_whitespace));
    }

    #[test]
    fn negation_scopes_sorted_disjoint_in_bounds(tokens in words()) {
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let scopes = detect_negation(&refs, &NegationTriggerSet::default());
        let mut prev_end = 0;
        for (i, s) in scopes.iter().enumerate() {
            prop_assert!(s.start < s.end && s.end <= tokens.len());
            if i > 0 {
                prop_assert!(s.start >= prev_end);
            }
            prev_end = s.end;
        }
    }

    #[test]
    fn split_is_a_partition(n in 2usize..60, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("doc{i:04}")).collect();
        let split = split_corpus(&ids, ratio, seed).unwrap();
        let train: BTreeSet<_> = split.train.iter().collect();
        let test: BTreeSet<_> = split.test.iter().collect();
        prop_assert!(train.is_disjoint(&test));
        let union: BTreeSet<_> = train.union(&test).copied().collect();
        prop_assert_eq!(union, ids.iter().collect::<BTreeSet<_>>());
        prop_assert_eq!(split_corpus(&ids, ratio, seed).unwrap(), split);
    }

    #[test]
    fn counts_and_metrics_match_oracle(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 0..120),
        target in 0u8..4,
    ) {
        let (pred, gold): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let c = confusion_counts(&pred, &gold, &target).unwrap();
        let oracle = brute_counts(&pred, &gold, &target);
        prop_assert_eq!(c, oracle);
        prop_assert_eq!(c.total(), pred.len() as u64);
        let row = metrics("x", c);
        prop_assert!(check_metric_row(&row, oracle, 1e-12).is_ok(), "{:?}", check_metric_row(&row, oracle, 1e-12));
        if let (Some(r), Some(p), Some(f)) = (row.recall, row.precision, row.f1) {
            prop_assert!((f - 2.0 * r * p / (r + p)).abs() <= 1e-15);
        }
        for v in [row.accuracy, row.recall, row.specificity, row.precision, row.f1].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn kappa_matches_oracle_and_is_symmetric(pairs in prop::collection::vec((0u8..3, 0u8..3), 0..80)) {
        let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let k = cohens_kappa(&a, &b).unwrap();
        prop_assert_eq!(k, cohens_kappa(&b, &a).unwrap());
        match (k, brute_kappa(&a, &b)) {
            (None, None) => {}
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y),
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
        if a.iter().collect::<BTreeSet<_>>().len() > 1 {
            prop_assert_eq!(cohens_kappa(&a, &a).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn metrics_are_permutation_invariant(pairs in prop::collection::vec((1u8..6, 1u8..6), 1..60), rot in 0usize..60) {
        let (pred, gold): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let mut rotated = pairs.clone();
        rotated.rotate_left(rot % pairs.len());
        let (p2, g2): (Vec<u8>, Vec<u8>) = rotated.into_iter().unzip();
        let a = pipescore_core::evaluation::evaluate_rating_labels(&pred, &gold).unwrap();
        let b = pipescore_core::evaluation::evaluate_rating_labels(&p2, &g2).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn spelling_is_identity_on_whole_vocabulary() {
    let lexicon = common::bundled_lexicon();
    let vocab = SpellVocabulary::from_lexicon(pipescore_core::resources::BASE_WORDS, &lexicon, 2).unwrap();
    for word in vocab.terms().filter(|w| !w.contains(' ')) {
        let token = tokenize(word).remove(0);
        assert_eq!(correct_spelling(&token, &vocab), token, "{word}");
    }
}

#[test]
fn rating_lattice_matches_table_oracle() {
    let table = WeightTable::default();
    let mut gaps = 0;
    for f in FREQUENCY_WEIGHTS {
        for l in LOCATION_WEIGHTS {
            for d in DEFECT_WEIGHTS {
                let got = assign_rating(&WeightTriple::new(f, l, d), &table).unwrap();
                match rating_oracle(f, l, d) {
                    RatingOracle::Listed(r) => {
                        assert_eq!((got.rating.value(), got.gap_row), (r, false), "({f}, {l}, {d})")
                    }
                    RatingOracle::NoDefect => {
                        assert_eq!((got.rating.value(), got.gap_row), (1, false), "({f}, {l}, {d})")
                    }
                    RatingOracle::Gap => {
                        gaps += 1;
                        assert_eq!((got.rating.value(), got.gap_row), (1, true), "({f}, {l}, {d})");
                    }
                }
            }
        }
    }
    assert_eq!(gaps, 4);
}

#[test]
fn rating_monotone_in_frequency_and_location_free() {
    let table = WeightTable::default();
    let rate = |f, l, d| {
        assign_rating(&WeightTriple::new(f, l, d), &table)
            .unwrap()
            .rating
            .value()
    };
    for d in [0.8, 1.0] {
        for l in LOCATION_WEIGHTS {
            let ratings: Vec<u8> = FREQUENCY_WEIGHTS.iter().map(|&f| rate(f, l, d)).collect();
            assert!(ratings.windows(2).all(|w| w[0] <= w[1]), "{ratings:?}");
        }
    }
    for f in FREQUENCY_WEIGHTS {
        for d in DEFECT_WEIGHTS {
            assert_eq!(rate(f, 0.9, d), rate(f, 1.0, d));
        }
    }
}

#[test]
fn rating_rejects_off_table_weights() {
    let table = WeightTable::default();
    for w in [
        (0.3, 0.9, 0.8),
        (0.99, 0.95, 0.8),
        (0.99, 0.9, 0.7),
        (f64::NAN, 0.9, 0.8),
    ] {
        assert!(
            assign_rating(&WeightTriple::new(w.0, w.1, w.2), &table).is_err(),
            "{w:?}"
        );
    }
}
