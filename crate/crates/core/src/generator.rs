//! Synthetic inspection documents with exact gold annotations.
//!
//! Each document has a `Defects` section built from weighted sentence
//! templates, optional negated sentences and a few neutral sections. Entity
//! terms are drawn from the lexicon, so every annotated term is a lexicon term
//! (or a numeric distance / size), and the gold rating is computed by the
//! rating engine from the annotated entities.
//!
//! Template placeholders:
//!
//! | placeholder             | entity                         |
//! |-------------------------|--------------------------------|
//! | `{defect}`, `{defect:t}`| defect term                    |
//! | `{freq}`, `{freq:t}`    | frequency term                 |
//! | `{location}`, `{location:t}` | location keyword          |
//! | `{distance}`            | `N feet` / `N feet away`       |
//! | `{size}`                | `N inches` / `N mm` / `N cm`   |
//!
//! `:t` fixes the term instead of sampling one.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{parse_document, Document, EntityType, GoldEntity, GoldRecord, Span};
use crate::error::{Error, Result};
use crate::lexicon::{normalize_term, Category, Lexicon};
use crate::preprocess::{Preprocessor, SpellVocabulary};
use crate::rating::{FrequencyBands, RatingEngine, FREQUENCY_BANDS};
use crate::tagger::{dictionary_tag, training_tags, PatternTable, Tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTemplate {
    pub text: String,
    pub weight: f64,
}

fn weighted(text: &str, weight: f64) -> WeightedTemplate {
    WeightedTemplate {
        text: text.to_string(),
        weight,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub count: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Chance that a document gets one negated sentence.
    pub negated_rate: f64,
    /// Chance that a document gets one misspelled defect term.
    pub typo_rate: f64,
    /// Chance that a document gets a second annotation, which omits one
    /// entity and is rated from what remains.
    pub second_annotator_rate: f64,
    /// Chance of adding neutral sections around `Defects`.
    pub extra_section_rate: f64,
    pub templates: Vec<WeightedTemplate>,
    pub negated_templates: Vec<WeightedTemplate>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            count: 500,
            min_sentences: 1,
            max_sentences: 3,
            negated_rate: 0.3,
            typo_rate: 0.1,
            second_annotator_rate: 0.0,
            extra_section_rate: 0.5,
            templates: vec![
                weighted(
                    "{freq}, there is a {defect} in pipe at {distance} from pipe installation.",
                    3.0,
                ),
                weighted("{freq} {defect} noted at the {location}.", 3.0),
                weighted("{defect} observed {freq} near the {location}.", 2.0),
                weighted("{defect} of {size} found at {distance}.", 2.0),
                weighted("{freq} {defect} and {defect} along the line.", 2.0),
                weighted("{defect} noted in the {location} section.", 1.0),
                weighted("Minor {defect} visible.", 1.0),
                weighted("{freq} {defect} with {size} depth at the {location}.", 1.0),
            ],
            negated_templates: vec![
                weighted("No {defect} observed.", 2.0),
                weighted("There is no {defect} near the {location}.", 1.0),
                weighted("Pipe is free of {defect}.", 1.0),
                weighted("No evidence of {defect} at {distance}.", 1.0),
            ],
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if ![
            self.negated_rate,
            self.typo_rate,
            self.second_annotator_rate,
            self.extra_section_rate,
        ]
        .into_iter()
        .all(rate_ok)
        {
            return Err(Error::Config("generator rates must lie in [0, 1]".into()));
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err(Error::Config("need 1 <= min_sentences <= max_sentences".into()));
        }
        for t in self.templates.iter().chain(&self.negated_templates) {
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return Err(Error::Config(format!("template weight must be positive: {}", t.text)));
            }
        }
        if self.templates.is_empty() {
            return Err(Error::Config("at least one template is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Slot {
        kind: EntityType,
        category: Option<Category>,
        fixed: Option<String>,
    },
}

fn parse_template(text: &str, lexicon: &Lexicon) -> Result<Vec<Piece>> {
    let bad = |reason: String| Error::Config(format!("template `{text}`: {reason}"));
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').ok_or_else(|| bad("unclosed `{`".into()))? + open;
        let inner = &rest[open + 1..close];
        let (name, fixed) = match inner.split_once(':') {
            Some((n, t)) => (n, Some(normalize_term(t))),
            None => (inner, None),
        };
        let (kind, category) = match name {
            "defect" => (EntityType::Defect, Some(Category::Defect)),
            "freq" => (EntityType::FrequencyOfDefects, Some(Category::Frequency)),
            "location" => (EntityType::LocationOfDefect, Some(Category::Location)),
            "distance" => (EntityType::LocationOfDefect, None),
            "size" => (EntityType::SizeOfDefect, None),
            other => return Err(bad(format!("unknown placeholder `{other}`"))),
        };
        if let Some(term) = &fixed {
            match (category, lexicon.get(term)) {
                (Some(c), Some(e)) if e.category == c => {}
                (Some(_), _) => return Err(bad(format!("`{term}` is not a {name} term in the lexicon"))),
                (None, _) => return Err(bad(format!("`{name}` takes no fixed term"))),
            }
        }
        pieces.push(Piece::Slot { kind, category, fixed });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    Ok(pieces)
}

const NEUTRAL_SECTIONS: [(&str, &[&str]); 3] = [
    (
        "Pipe Characteristics",
        &[
            "Vitrified clay pipe with concrete joints.",
            "Ductile iron main line.",
            "Pvc service line.",
        ],
    ),
    ("Criticality Assessment", &["Medium risk.", "High risk.", "Low risk."]),
    (
        "Summary",
        &[
            "Total of one major defect recorded.",
            "Minor defects identified.",
            "Inspection record noted.",
        ],
    ),
];

/// A generated corpus: raw documents (not yet preprocessed) and their gold
/// records, sorted by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub records: Vec<GoldRecord>,
}

struct Pools<'a> {
    terms: BTreeMap<Category, Vec<&'a str>>,
    /// Frequency terms grouped by band.
    freq_bands: Vec<Vec<&'a str>>,
}

/// Lexicon terms the dictionary tagger reads back as exactly one entry of
/// their own category inside a neutral carrier sentence.
fn usable_pools<'a>(lexicon: &'a Lexicon, pre: &Preprocessor, bands: &FrequencyBands) -> Pools<'a> {
    let mut terms: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    let mut freq_bands = vec![Vec::new(); FREQUENCY_BANDS];
    for entry in lexicon.entries() {
        let text = format!("There is {} here.", entry.term);
        let Ok(doc) = parse_document(&text, "probe") else {
            continue;
        };
        let doc = pre.process(doc);
        let [sentence] = doc.sentences.as_slice() else {
            continue;
        };
        let words = sentence.normalized_tokens();
        let n = entry.term.split(' ').count();
        let matches = lexicon.lookup(&words);
        let clean = words.get(2..2 + n).is_some_and(|w| w.join(" ") == entry.term)
            && matches.len() == 1
            && matches[0].entry.term == entry.term
            && matches[0].tokens == Span::new(2, 2 + n)
            && sentence.negation_scopes.is_empty();
        if !clean {
            continue;
        }
        if entry.category == Category::Frequency {
            match bands.band(&entry.term).or_else(|| bands.band(&entry.seed_root)) {
                Some(b) => freq_bands[b].push(entry.term.as_str()),
                None => continue,
            }
        }
        terms.entry(entry.category).or_default().push(entry.term.as_str());
    }
    Pools { terms, freq_bands }
}

struct Builder {
    raw: String,
    entities: Vec<GoldEntity>,
}

impl Builder {
    fn push(&mut self, text: &str) {
        self.raw.push_str(text);
    }

    fn push_entity(&mut self, text: &str, kind: EntityType) {
        let start = self.raw.len();
        self.raw.push_str(text);
        self.entities.push(GoldEntity {
            entity_type: kind,
            span: Span::new(start, self.raw.len()),
        });
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pick_template<'t>(rng: &mut ChaCha8Rng, templates: &'t [(Vec<Piece>, f64)]) -> &'t [Piece] {
    let total: f64 = templates.iter().map(|t| t.1).sum();
    let mut x = rng.gen_range(0.0..total);
    for (pieces, w) in templates {
        if x < *w {
            return pieces;
        }
        x -= w;
    }
    &templates[templates.len() - 1].0
}

/// Swaps two adjacent interior letters when spelling correction maps the
/// result back to `term`.
fn typo(term: &str, vocab: &SpellVocabulary, rng: &mut ChaCha8Rng) -> Option<String> {
    let chars: Vec<char> = term.chars().collect();
    if term.contains(' ') || chars.len() < 5 {
        return None;
    }
    let mut positions: Vec<usize> = (1..chars.len() - 2).collect();
    positions.shuffle(rng);
    positions.into_iter().find_map(|i| {
        let mut c = chars.clone();
        c.swap(i, i + 1);
        let t: String = c.into_iter().collect();
        (t != term && !vocab.contains(&t) && vocab.suggest(&t) == Some(term)).then_some(t)
    })
}

/// Generates `config.count` documents with ids `doc0000`, `doc0001`, ...
pub fn generate_synthetic_corpus(config: &GeneratorConfig, lexicon: &Lexicon, seed: u64) -> Result<SyntheticCorpus> {
    generate_with(config, lexicon, &RatingEngine::default(), seed)
}

pub fn generate_with(
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    engine: &RatingEngine,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if lexicon.is_empty() {
        return Err(Error::LexiconRequired);
    }
    config.validate()?;
    let pre = Preprocessor::with_lexicon(lexicon)?;
    let pools = usable_pools(lexicon, &pre, &engine.bands);
    let parse_all = |ts: &[WeightedTemplate]| -> Result<Vec<(Vec<Piece>, f64)>> {
        ts.iter()
            .map(|t| Ok((parse_template(&t.text, lexicon)?, t.weight)))
            .collect()
    };
    let templates = parse_all(&config.templates)?;
    let negated = parse_all(&config.negated_templates)?;
    for (pieces, _) in templates.iter().chain(&negated) {
        for p in pieces {
            if let Piece::Slot {
                category: Some(c),
                fixed: None,
                ..
            } = p
            {
                if pools.terms.get(c).is_none_or(|v| v.is_empty()) {
                    return Err(Error::LexiconRequired);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = config.count.saturating_sub(1).to_string().len().max(4);
    let mut documents = Vec::with_capacity(config.count);
    let mut records = Vec::with_capacity(config.count);
    for n in 0..config.count {
        let id = format!("doc{n:0width$}");
        let mut b = Builder {
            raw: String::new(),
            entities: Vec::new(),
        };

        let extra = rng.gen_bool(config.extra_section_rate);
        if extra {
            let (name, options) = NEUTRAL_SECTIONS[0];
            b.push(&format!("{name}: {}\n", options.choose(&mut rng).unwrap()));
        }
        b.push("Defects:");
        let count = rng.gen_range(config.min_sentences..=config.max_sentences);
        let mut sentences: Vec<&[Piece]> = (0..count).map(|_| pick_template(&mut rng, &templates)).collect();
        if !negated.is_empty() && rng.gen_bool(config.negated_rate) {
            let at = rng.gen_range(0..=sentences.len());
            sentences.insert(at, pick_template(&mut rng, &negated));
        }
        let typo_doc = rng.gen_bool(config.typo_rate);
        let mut typo_done = false;
        for pieces in sentences {
            b.push(" ");
            for (i, piece) in pieces.iter().enumerate() {
                match piece {
                    Piece::Text(t) if i == 0 => b.push(&capitalize(t)),
                    Piece::Text(t) => b.push(t),
                    Piece::Slot { kind, category, fixed } => {
                        let mut surface = match (category, fixed) {
                            (_, Some(term)) => term.clone(),
                            (Some(Category::Frequency), None) => {
                                let bands: Vec<&Vec<&str>> =
                                    pools.freq_bands.iter().filter(|v| !v.is_empty()).collect();
                                bands.choose(&mut rng).unwrap().choose(&mut rng).unwrap().to_string()
                            }
                            (Some(c), None) => pools.terms[c].choose(&mut rng).unwrap().to_string(),
                            (None, _) if *kind == EntityType::SizeOfDefect => {
                                let unit = ["inches", "mm", "cm"].choose(&mut rng).unwrap();
                                format!("{} {unit}", rng.gen_range(1..=24))
                            }
                            (None, _) => {
                                let away = if rng.gen_bool(0.5) { " away" } else { "" };
                                format!("{} feet{away}", rng.gen_range(2..=150))
                            }
                        };
                        if typo_doc && !typo_done && *kind == EntityType::Defect {
                            if let Some(t) = typo(&surface, &pre.vocab, &mut rng) {
                                surface = t;
                                typo_done = true;
                            }
                        }
                        if i == 0 {
                            surface = capitalize(&surface);
                        }
                        b.push_entity(&surface, *kind);
                    }
                }
            }
        }
        b.push("\n");
        if extra {
            for (name, options) in &NEUTRAL_SECTIONS[1..] {
                b.push(&format!("{name}: {}\n", options.choose(&mut rng).unwrap()));
            }
        }

        let doc = parse_document(&b.raw, &id)?;
        let processed = pre.process(doc.clone());
        let mut record = GoldRecord {
            document_id: id.clone(),
            entities: b.entities,
            rating: 0,
            annotator_id: "a1".to_string(),
        };
        record.rating = engine.rate_gold(&processed, &record, lexicon)?.rating.value();
        let second = rng.gen_bool(config.second_annotator_rate).then(|| {
            let mut r = record.clone();
            r.annotator_id = "a2".to_string();
            if !r.entities.is_empty() {
                let drop = rng.gen_range(0..r.entities.len());
                r.entities.remove(drop);
            }
            r
        });
        records.push(record);
        if let Some(mut r) = second {
            r.rating = engine.rate_gold(&processed, &r, lexicon)?.rating.value();
            records.push(r);
        }
        documents.push(doc);
    }
    Ok(SyntheticCorpus { documents, records })
}

/// True when the dictionary tagger reproduces the gold tags of every
/// sentence of a preprocessed document, outside pattern-matched spans.
pub fn dictionary_agrees(doc: &Document, record: &GoldRecord, lexicon: &Lexicon, patterns: &PatternTable) -> bool {
    doc.sentences.iter().all(|s| {
        let mut tags = dictionary_tag(s, lexicon);
        for m in patterns.find(&s.normalized_tokens()) {
            tags[m.tokens.start..m.tokens.end].fill(Tag::O);
        }
        tags == training_tags(s, record, patterns)
    })
}
