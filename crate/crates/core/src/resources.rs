//! Bundled default resource files.
//!
//! Every file here can be overridden from the pipeline configuration; the
//! embedded copies are used when no path is given.

pub const SEEDS: &str = include_str!("../resources/seeds.tsv");
pub const SYNONYM_GRAPH: &str = include_str!("../resources/synonyms.tsv");
pub const BLACKLIST: &str = include_str!("../resources/blacklist.tsv");
pub const NEGATION_TRIGGERS: &str = include_str!("../resources/negation.txt");
pub const ABBREVIATIONS: &str = include_str!("../resources/abbreviations.txt");
pub const BASE_WORDS: &str = include_str!("../resources/base_words.txt");
pub const SIZE_PATTERNS: &str = include_str!("../resources/size_patterns.tsv");
pub const FREQUENCY_BANDS: &str = include_str!("../resources/frequency_bands.tsv");

/// Iterates non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, trimmed))
        }
    })
}
