//! Shared fixtures for the pipeline benchmarks.

use pipescore_core::generator::{generate_synthetic_corpus, GeneratorConfig};
use pipescore_core::lexicon::{expand_synonyms, parse_seeds, Blacklist, SynonymGraph};
use pipescore_core::resources;
use pipescore_core::tagger::{ModelDims, Vocabulary};
use pipescore_core::{Document, Lexicon, Preprocessor, TaggerModel};

pub struct Fixture {
    pub lexicon: Lexicon,
    pub preprocessor: Preprocessor,
    /// Parsed but not preprocessed.
    pub raw: Vec<Document>,
    pub documents: Vec<Document>,
    /// Randomly initialised at the default dimensions.
    pub model: TaggerModel,
}

pub fn bundled_lexicon() -> Lexicon {
    let seeds = parse_seeds(resources::SEEDS).expect("bundled seeds");
    let graph = SynonymGraph::parse(resources::SYNONYM_GRAPH).expect("bundled graph");
    let blacklist = Blacklist::parse(resources::BLACKLIST).expect("bundled blacklist");
    expand_synonyms(&seeds, &graph, &blacklist, 2).expect("bundled lexicon")
}

/// `count` synthetic documents and everything needed to run them.
pub fn fixture(count: usize) -> Fixture {
    let lexicon = bundled_lexicon();
    let preprocessor = Preprocessor::with_lexicon(&lexicon).expect("preprocessor");
    let config = GeneratorConfig {
        count,
        ..GeneratorConfig::default()
    };
    let raw = generate_synthetic_corpus(&config, &lexicon, 1)
        .expect("corpus")
        .documents;
    let documents: Vec<Document> = raw.iter().cloned().map(|d| preprocessor.process(d)).collect();
    let words = documents
        .iter()
        .flat_map(|d| &d.sentences)
        .flat_map(|s| s.normalized_tokens())
        .map(str::to_string)
        .collect::<Vec<_>>();
    let model = TaggerModel::init(Vocabulary::new(words), ModelDims::default(), 0.1, 1);
    Fixture {
        lexicon,
        preprocessor,
        raw,
        documents,
        model,
    }
}
