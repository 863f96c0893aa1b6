//! Token tagging and per-sentence entity frames.
//!
//! Two taggers share the [`Tagger`] trait: [`DictionaryTagger`] maps lexicon
//! matches straight to tags, and [`TaggerModel`] is a Bi-LSTM that reads word
//! embeddings concatenated with a lexicon-category feature. Both use the IO
//! scheme with four tags, so adjacent entities of the same type merge.
//!
//! Numeric distances ("at 10 feet away") and sizes ("2 inches") are not
//! tagged; [`PatternTable`] finds them and they take priority over tags.

mod lstm;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntityType, GoldRecord, Sentence, Span};
use crate::error::{Error, Result};
use crate::lexicon::{Category, Lexicon};
use crate::resources::{self, content_lines};

pub use lstm::{lstm_step, LstmParams};
pub use model::{ModelDims, TaggerModel, Vocabulary};
pub use train::{
    gradient_check, loss, train, train_examples, GradientCheck, TrainConfig, TrainingExample, TrainingOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    O = 0,
    Defect = 1,
    Location = 2,
    Frequency = 3,
}

impl Tag {
    pub const COUNT: usize = 4;
    pub const ALL: [Tag; 4] = [Tag::O, Tag::Defect, Tag::Location, Tag::Frequency];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn from_category(category: Option<Category>) -> Tag {
        match category {
            None => Tag::O,
            Some(Category::Defect) => Tag::Defect,
            Some(Category::Location) => Tag::Location,
            Some(Category::Frequency) => Tag::Frequency,
        }
    }

    pub fn category(self) -> Option<Category> {
        match self {
            Tag::O => None,
            Tag::Defect => Some(Category::Defect),
            Tag::Location => Some(Category::Location),
            Tag::Frequency => Some(Category::Frequency),
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            Tag::O => None,
            Tag::Defect => Some(EntityType::Defect),
            Tag::Location => Some(EntityType::LocationOfDefect),
            Tag::Frequency => Some(EntityType::FrequencyOfDefects),
        }
    }

    /// Training target for a gold entity type. Sizes are pattern-matched, so
    /// they train as `O`.
    pub fn for_entity_type(t: EntityType) -> Tag {
        match t {
            EntityType::Defect => Tag::Defect,
            EntityType::LocationOfDefect => Tag::Location,
            EntityType::FrequencyOfDefects => Tag::Frequency,
            EntityType::SizeOfDefect => Tag::O,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::O => "O",
            Tag::Defect => "DEFECT",
            Tag::Location => "LOCATION",
            Tag::Frequency => "FREQUENCY",
        })
    }
}

/// Per-token lexicon category index: 0 none, then defect, location, frequency.
pub fn lexicon_features(sentence: &Sentence, lexicon: &Lexicon) -> Vec<usize> {
    dictionary_tag(sentence, lexicon).into_iter().map(Tag::index).collect()
}

/// Tags every token covered by a longest-match lexicon entry with the entry's
/// category; all other tokens are `O`.
pub fn dictionary_tag(sentence: &Sentence, lexicon: &Lexicon) -> Vec<Tag> {
    let words = sentence.normalized_tokens();
    let mut tags = vec![Tag::O; words.len()];
    for m in lexicon.lookup(&words) {
        for tag in &mut tags[m.tokens.start..m.tokens.end] {
            *tag = Tag::from_category(Some(m.entry.category));
        }
    }
    tags
}

/// Tags from annotated raw byte spans: each token takes the type of the first
/// entity overlapping it. Sizes have no tag and map to `O`.
pub fn gold_tags(sentence: &Sentence, record: &GoldRecord) -> Vec<Tag> {
    sentence
        .tokens
        .iter()
        .map(|tok| {
            record
                .entities
                .iter()
                .find(|e| e.span.overlaps(&tok.raw_span))
                .map_or(Tag::O, |e| Tag::for_entity_type(e.entity_type))
        })
        .collect()
}

/// Training targets: [`gold_tags`] with pattern-matched tokens set to `O`,
/// since extraction takes those spans from the pattern table.
pub fn training_tags(sentence: &Sentence, record: &GoldRecord, patterns: &PatternTable) -> Vec<Tag> {
    let mut tags = gold_tags(sentence, record);
    for m in patterns.find(&sentence.normalized_tokens()) {
        tags[m.tokens.start..m.tokens.end].fill(Tag::O);
    }
    tags
}

pub trait Tagger: Sync {
    fn name(&self) -> &'static str;

    fn tag(&self, sentence: &Sentence, lexicon: &Lexicon) -> Result<Vec<Tag>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DictionaryTagger;

impl Tagger for DictionaryTagger {
    fn name(&self) -> &'static str {
        "dict"
    }

    fn tag(&self, sentence: &Sentence, lexicon: &Lexicon) -> Result<Vec<Tag>> {
        Ok(dictionary_tag(sentence, lexicon))
    }
}

impl Tagger for TaggerModel {
    fn name(&self) -> &'static str {
        "bilstm"
    }

    fn tag(&self, sentence: &Sentence, lexicon: &Lexicon) -> Result<Vec<Tag>> {
        self.predict_tags(sentence, lexicon)
    }
}

/// One row of the numeric pattern table.
#[derive(Debug, Clone)]
pub struct PatternRow {
    pub entity_type: EntityType,
    pub unit: String,
    pub regex: Regex,
}

/// Ordered numeric patterns for distances and sizes, matched against the
/// normalized tokens of a sentence joined by single spaces.
#[derive(Debug, Clone)]
pub struct PatternTable {
    rows: Vec<PatternRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatch {
    pub tokens: Span,
    pub entity_type: EntityType,
    pub unit: String,
}

impl Default for PatternTable {
    fn default() -> Self {
        Self::parse(resources::SIZE_PATTERNS).expect("bundled pattern table is valid")
    }
}

impl PatternTable {
    /// Reads `role <TAB> unit <TAB> regex` lines; role is `size` or `location`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line, content) in content_lines(text) {
            let bad = |reason: String| Error::ResourceFormat {
                file: "pattern table".into(),
                line,
                reason,
            };
            let mut fields = content.splitn(3, '\t');
            let (Some(role), Some(unit), Some(pattern)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad("expected `role<TAB>unit<TAB>regex`".into()));
            };
            let entity_type = match role.trim() {
                "size" => EntityType::SizeOfDefect,
                "location" => EntityType::LocationOfDefect,
                other => return Err(bad(format!("unknown role `{other}`"))),
            };
            rows.push(PatternRow {
                entity_type,
                unit: unit.trim().to_string(),
                regex: Regex::new(pattern)?,
            });
        }
        Ok(PatternTable { rows })
    }

    /// Non-overlapping matches aligned to token boundaries, sorted by
    /// position. Earlier rows win on overlap.
    pub fn find<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<PatternMatch> {
        let mut text = String::new();
        let mut starts = Vec::with_capacity(tokens.len());
        let mut ends = Vec::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            starts.push(text.len());
            text.push_str(t.as_ref());
            ends.push(text.len());
        }

        let mut found: Vec<PatternMatch> = Vec::new();
        for row in &self.rows {
            for caps in row.regex.captures_iter(&text) {
                let m = caps
                    .name("span")
                    .or_else(|| caps.get(0))
                    .expect("group 0 always exists");
                let (Some(first), Some(last)) = (
                    starts.iter().position(|&s| s == m.start()),
                    ends.iter().position(|&e| e == m.end()),
                ) else {
                    continue;
                };
                let span = Span::new(first, last + 1);
                if found.iter().any(|f| f.tokens.overlaps(&span)) {
                    continue;
                }
                found.push(PatternMatch {
                    tokens: span,
                    entity_type: row.entity_type,
                    unit: row.unit.clone(),
                });
            }
        }
        found.sort_by_key(|m| m.tokens);
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntitySource {
    Tagger,
    Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchedTerm {
    pub term: String,
    pub seed_root: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_type: EntityType,
    /// Half-open token range within the sentence.
    pub tokens: Span,
    pub negated: bool,
    /// Normalized token text joined by spaces.
    pub text: String,
    /// Byte span in the raw document.
    pub raw_span: Span,
    /// Lexicon entries of the entity's category found inside the span.
    pub lexicon_matches: Vec<MatchedTerm>,
    pub source: EntitySource,
    /// Unit name for pattern entities.
    pub unit: Option<String>,
}

impl Entity {
    pub fn matched_lexicon_term(&self) -> Option<&str> {
        self.lexicon_matches.first().map(|m| m.term.as_str())
    }
}

/// The entities of one sentence grouped by type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityFrame {
    pub defects: Vec<Entity>,
    pub sizes: Vec<Entity>,
    pub locations: Vec<Entity>,
    pub frequencies: Vec<Entity>,
}

impl EntityFrame {
    pub fn push(&mut self, entity: Entity) {
        match entity.entity_type {
            EntityType::Defect => self.defects.push(entity),
            EntityType::SizeOfDefect => self.sizes.push(entity),
            EntityType::LocationOfDefect => self.locations.push(entity),
            EntityType::FrequencyOfDefects => self.frequencies.push(entity),
        }
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.defects
            .iter()
            .chain(&self.sizes)
            .chain(&self.locations)
            .chain(&self.frequencies)
    }

    pub fn len(&self) -> usize {
        self.defects.len() + self.sizes.len() + self.locations.len() + self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the entity frame of a sentence.
///
/// Pattern matches become size or distance-location entities first. Tags on
/// pattern-covered tokens are ignored; every remaining maximal run of one
/// non-`O` tag becomes an entity. An entity is negated when its token range
/// intersects a negation scope of the sentence.
pub fn extract_entities(
    sentence: &Sentence,
    tags: &[Tag],
    lexicon: &Lexicon,
    patterns: &PatternTable,
) -> Result<EntityFrame> {
    if tags.len() != sentence.tokens.len() {
        return Err(Error::AlignmentError {
            left: tags.len(),
            right: sentence.tokens.len(),
        });
    }
    let words = sentence.normalized_tokens();
    let make = |span: Span, entity_type, source, unit: Option<String>| {
        let text = words[span.start..span.end].join(" ");
        let lexicon_matches = match entity_type {
            EntityType::SizeOfDefect => Vec::new(),
            _ => {
                let category = Tag::for_entity_type(entity_type).category();
                lexicon
                    .lookup(&words[span.start..span.end])
                    .into_iter()
                    .filter(|m| Some(m.entry.category) == category)
                    .map(|m| MatchedTerm {
                        term: m.entry.term.clone(),
                        seed_root: m.entry.seed_root.clone(),
                    })
                    .collect()
            }
        };
        Entity {
            entity_type,
            tokens: span,
            negated: sentence.is_negated(span),
            text,
            raw_span: Span::new(
                sentence.tokens[span.start].raw_span.start,
                sentence.tokens[span.end - 1].raw_span.end,
            ),
            lexicon_matches,
            source,
            unit,
        }
    };

    let mut frame = EntityFrame::default();
    let mut masked = tags.to_vec();
    for m in patterns.find(&words) {
        for t in &mut masked[m.tokens.start..m.tokens.end] {
            *t = Tag::O;
        }
        frame.push(make(m.tokens, m.entity_type, EntitySource::Pattern, Some(m.unit)));
    }
    let mut i = 0;
    while i < masked.len() {
        let tag = masked[i];
        let Some(entity_type) = tag.entity_type() else {
            i += 1;
            continue;
        };
        let start = i;
        while i < masked.len() && masked[i] == tag {
            i += 1;
        }
        frame.push(make(Span::new(start, i), entity_type, EntitySource::Tagger, None));
    }
    Ok(frame)
}

impl FromStr for Tag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Tag::ALL.into_iter().find(|t| t.to_string() == s).ok_or(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_document;
    use crate::lexicon::{expand_synonyms, parse_seeds, Blacklist, SynonymGraph};
    use crate::preprocess::Preprocessor;

    fn lexicon() -> Lexicon {
        let seeds = parse_seeds(resources::SEEDS).unwrap();
        let graph = SynonymGraph::parse(resources::SYNONYM_GRAPH).unwrap();
        let bl = Blacklist::parse(resources::BLACKLIST).unwrap();
        expand_synonyms(&seeds, &graph, &bl, 2).unwrap()
    }

    fn sentence(text: &str, lex: &Lexicon) -> Sentence {
        let pre = Preprocessor::with_lexicon(lex).unwrap();
        let doc = pre.process(parse_document(text, "t").unwrap());
        doc.sentences.into_iter().next().unwrap()
    }

    #[test]
    fn dictionary_examples() {
        let lex = lexicon();
        let s = sentence("Frequently leaks", &lex);
        assert_eq!(dictionary_tag(&s, &lex), [Tag::Frequency, Tag::Defect]);
        let s = sentence("the pipe was inspected", &lex);
        assert!(dictionary_tag(&s, &lex).iter().all(|t| *t == Tag::O));
        let s = sentence("deposits settled here", &lex);
        assert_eq!(dictionary_tag(&s, &lex), [Tag::Defect, Tag::Defect, Tag::O]);
    }

    #[test]
    fn negated_defect_entity() {
        let lex = lexicon();
        let s = sentence("no leaks", &lex);
        assert_eq!(s.negation_scopes, vec![Span::new(1, 2)]);
        let frame = extract_entities(&s, &[Tag::O, Tag::Defect], &lex, &PatternTable::default()).unwrap();
        assert_eq!(frame.defects.len(), 1);
        assert!(frame.defects[0].negated);
        assert_eq!(frame.defects[0].matched_lexicon_term(), Some("leaks"));
    }

    #[test]
    fn distance_becomes_location() {
        let lex = lexicon();
        let s = sentence("10 feet away from pipe installation", &lex);
        let tags = dictionary_tag(&s, &lex);
        let frame = extract_entities(&s, &tags, &lex, &PatternTable::default()).unwrap();
        assert_eq!(frame.locations.len(), 1);
        assert_eq!(frame.locations[0].text, "10 feet away");
        assert_eq!(frame.locations[0].source, EntitySource::Pattern);
        assert_eq!(frame.len(), 1);
    }

    #[test]
    fn size_pattern_and_all_o() {
        let lex = lexicon();
        let s = sentence("crack of 2 inches near the inlet", &lex);
        let frame = extract_entities(&s, &dictionary_tag(&s, &lex), &lex, &PatternTable::default()).unwrap();
        assert_eq!(frame.sizes.len(), 1);
        assert_eq!(frame.sizes[0].text, "2 inches");
        assert_eq!(frame.defects.len(), 1);

        let s = sentence("the pipe was inspected", &lex);
        let tags = vec![Tag::O; s.tokens.len()];
        assert!(extract_entities(&s, &tags, &lex, &PatternTable::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn misaligned_tags_error() {
        let lex = lexicon();
        let s = sentence("no leaks", &lex);
        assert!(matches!(
            extract_entities(&s, &[Tag::O], &lex, &PatternTable::default()),
            Err(Error::AlignmentError { .. })
        ));
    }

    #[test]
    fn raw_spans_point_at_surface_text() {
        let lex = lexicon();
        let raw = "Defects: Very Frequently, there is a leakage in pipe at 10 feet away.";
        let pre = Preprocessor::with_lexicon(&lex).unwrap();
        let doc = pre.process(parse_document(raw, "t").unwrap());
        let s = &doc.sentences[0];
        let frame = extract_entities(s, &dictionary_tag(s, &lex), &lex, &PatternTable::default()).unwrap();
        let texts: Vec<_> = frame
            .entities()
            .map(|e| &raw[e.raw_span.start..e.raw_span.end])
            .collect();
        assert_eq!(texts, ["leakage", "10 feet away", "Very Frequently"]);
    }
}
