#![allow(dead_code)]

use pipescore_core::lexicon::{expand_synonyms, parse_seeds, Blacklist, SynonymGraph};
use pipescore_core::resources;
use pipescore_core::Lexicon;

pub fn bundled_lexicon() -> Lexicon {
    let seeds = parse_seeds(resources::SEEDS).unwrap();
    let graph = SynonymGraph::parse(resources::SYNONYM_GRAPH).unwrap();
    let blacklist = Blacklist::parse(resources::BLACKLIST).unwrap();
    expand_synonyms(&seeds, &graph, &blacklist, 2).unwrap()
}
