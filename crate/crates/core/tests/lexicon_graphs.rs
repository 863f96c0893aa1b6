mod common;
mod oracles;

use proptest::prelude::*;

use oracles::{check_graph_case, check_lookup, GraphCase};

fn graph_case() -> impl Strategy<Value = GraphCase> {
    (2usize..=20).prop_flat_map(|n| {
        let edge = (0..n, 0..n);
        (
            Just(n),
            prop::collection::vec(edge.clone(), 0..40),
            prop::collection::vec(edge.clone(), 0..6),
            prop::collection::vec(0..n, 1..4),
            prop::collection::vec(edge, 0..8),
        )
            .prop_map(|(nodes, synonyms, antonyms, seeds, banned)| GraphCase {
                nodes,
                synonyms,
                antonyms,
                seeds,
                banned,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn expansion_matches_shortest_path_oracle(case in graph_case()) {
        if let Err(e) = check_graph_case(&case, 4) {
            prop_assert!(false, "{}", e);
        }
    }
}

fn vocabulary_words() -> Vec<String> {
    let lexicon = common::bundled_lexicon();
    let mut words: Vec<String> = lexicon
        .terms()
        .iter()
        .flat_map(|t| t.split(' '))
        .map(str::to_string)
        .collect();
    words.extend(["the", "at", "pipe", "and", "of"].map(String::from));
    words.sort();
    words.dedup();
    words
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lookup_is_non_overlapping_and_maximal(picks in prop::collection::vec(any::<prop::sample::Index>(), 0..25)) {
        let words = vocabulary_words();
        let tokens: Vec<String> = picks.iter().map(|i| i.get(&words).clone()).collect();
        if let Err(e) = check_lookup(&common::bundled_lexicon(), &tokens) {
            prop_assert!(false, "{}", e);
        }
    }
}

#[test]
fn lookup_prefers_multiword_terms() {
    let lexicon = common::bundled_lexicon();
    let multi: Vec<String> = lexicon
        .terms()
        .iter()
        .filter(|t| t.contains(' '))
        .map(|t| t.to_string())
        .collect();
    assert!(!multi.is_empty());
    for term in multi {
        let tokens: Vec<String> = term.split(' ').map(str::to_string).collect();
        let m = lexicon.lookup(&tokens);
        assert_eq!(m.len(), 1, "{term}");
        assert_eq!(m[0].entry.term, term);
    }
}
