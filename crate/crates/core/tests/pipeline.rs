mod common;

use std::time::Instant;

use pipescore_core::corpus::parse_document;
use pipescore_core::evaluation::{evaluate_entities, evaluate_ratings};
use pipescore_core::generator::{dictionary_agrees, generate_synthetic_corpus, GeneratorConfig};
use pipescore_core::tagger::PatternTable;
use pipescore_core::{DictionaryTagger, Document, GoldRecord, Preprocessor, RatingEngine, WeightTriple};

const BOX_1: &str = "Very Frequently, there is a leakage in pipe at 10 feet away from pipe installation";

fn corpus(count: usize, seed: u64) -> (Vec<Document>, Vec<GoldRecord>) {
    let lexicon = common::bundled_lexicon();
    let pre = Preprocessor::with_lexicon(&lexicon).unwrap();
    let config = GeneratorConfig {
        count,
        ..GeneratorConfig::default()
    };
    let c = generate_synthetic_corpus(&config, &lexicon, seed).unwrap();
    (c.documents.into_iter().map(|d| pre.process(d)).collect(), c.records)
}

#[test]
fn box_one_rates_five() {
    let start = Instant::now();
    let lexicon = common::bundled_lexicon();
    let pre = Preprocessor::with_lexicon(&lexicon).unwrap();
    let doc = pre.process(parse_document(BOX_1, "05CCD").unwrap());
    let report = RatingEngine::default()
        .rate_document(&doc, &lexicon, &DictionaryTagger)
        .unwrap();
    assert_eq!(report.weights, WeightTriple::new(0.99, 0.9, 0.8));
    assert_eq!(report.rating.value(), 5);
    assert_eq!(report.action_text, "Rehabilitate or replace immediately");
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn gold_ratings_follow_from_gold_entities() {
    let lexicon = common::bundled_lexicon();
    let engine = RatingEngine::default();
    let (docs, records) = corpus(300, 21);
    for (doc, record) in docs.iter().zip(&records) {
        let rated = engine.rate_gold(doc, record, &lexicon).unwrap();
        assert_eq!(rated.rating.value(), record.rating, "{}", doc.id);
        assert!(
            dictionary_agrees(doc, record, &lexicon, &PatternTable::default()),
            "{}",
            doc.id
        );
    }
}

#[test]
fn dictionary_tagger_is_exact_on_synthetic_corpus() {
    let lexicon = common::bundled_lexicon();
    let engine = RatingEngine::default();
    let (docs, records) = corpus(300, 22);
    let pred: Vec<GoldRecord> = docs
        .iter()
        .map(|d| {
            engine
                .rate_document(d, &lexicon, &DictionaryTagger)
                .unwrap()
                .to_record()
        })
        .collect();
    let entities = evaluate_entities(&docs, &pred, &records, true).unwrap();
    assert_eq!(entities.token_accuracy, Some(1.0));
    for row in &entities.rows {
        for v in [row.accuracy, row.recall, row.precision, row.f1] {
            assert!(v.is_none() || v == Some(1.0), "{row:?}");
        }
        assert_eq!(row.counts.fp + row.counts.fn_, 0, "{row:?}");
    }
    let ratings = evaluate_ratings(&pred, &records).unwrap();
    assert_eq!(ratings.accuracy, Some(1.0));
}

#[test]
fn appended_negated_sentence_never_raises_rating() {
    let lexicon = common::bundled_lexicon();
    let pre = Preprocessor::with_lexicon(&lexicon).unwrap();
    let engine = RatingEngine::default();
    let (docs, _) = corpus(200, 23);
    for doc in &docs {
        let before = engine.rate_document(doc, &lexicon, &DictionaryTagger).unwrap();
        let raw = format!("{}\nNo leaks and no defects.\n", doc.raw.trim_end());
        let extended = pre.process(parse_document(&raw, &doc.id).unwrap());
        let after = engine.rate_document(&extended, &lexicon, &DictionaryTagger).unwrap();
        assert!(
            after.rating <= before.rating,
            "{}: {} -> {}",
            doc.id,
            before.rating,
            after.rating
        );
        assert!(after.negated_excluded > before.negated_excluded, "{}", doc.id);
    }
}

#[test]
fn empty_document_rates_one() {
    let lexicon = common::bundled_lexicon();
    let pre = Preprocessor::with_lexicon(&lexicon).unwrap();
    let doc = pre.process(parse_document("Summary:\n", "empty").unwrap());
    let report = RatingEngine::default()
        .rate_document(&doc, &lexicon, &DictionaryTagger)
        .unwrap();
    assert_eq!(report.weights, WeightTriple::new(0.1, 1.0, 0.5));
    assert_eq!(report.rating.value(), 1);
}
