//! Weight assignment and the 1-5 defect rating lookup.
//!
//! Each document gets three weights: `w_frequencies` from the strongest
//! frequency term, `w_location` from the number of locations and `w_defect`
//! from the number of distinct defect lexicon units. The rating is then read
//! off a fixed table:
//!
//! | w_frequencies | w_location | w_defect   | rating |
//! |---------------|------------|------------|--------|
//! | 0.1           | 0.9 or 1.0 | 0.5        | 1      |
//! | 0.25          | 0.9 or 1.0 | 0.8 or 1.0 | 2      |
//! | 0.5           | 0.9 or 1.0 | 0.8 or 1.0 | 3      |
//! | 0.75          | 0.9 or 1.0 | 0.8 or 1.0 | 4      |
//! | 0.99          | 0.9 or 1.0 | 0.8 or 1.0 | 5      |
//!
//! Any triple with `w_defect = 0.5` rates 1. The two triples the table leaves
//! out, `w_frequencies = 0.1` with a defect present, also rate 1 and are
//! flagged as [`RatingFlag::GapRow`]. Negated entities never count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityType, GoldEntity, GoldRecord};
use crate::error::{Error, Result};
use crate::lexicon::{normalize_term, Lexicon};
use crate::resources::{self, content_lines};
use crate::tagger::{extract_entities, gold_tags, Entity, EntityFrame, EntitySource, PatternTable, Tagger};

/// Number of frequency bands, from "very rarely or none" to "frequently".
pub const FREQUENCY_BANDS: usize = 5;

/// Weights chosen by how many items of a kind were found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountWeights {
    pub none: f64,
    pub one: f64,
    pub multiple: f64,
}

impl CountWeights {
    pub fn for_count(&self, n: usize) -> f64 {
        match n {
            0 => self.none,
            1 => self.one,
            _ => self.multiple,
        }
    }

    fn contains(&self, w: f64) -> bool {
        w == self.none || w == self.one || w == self.multiple
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightTable {
    pub location: CountWeights,
    /// Indexed by frequency band.
    pub frequency: [f64; FREQUENCY_BANDS],
    pub defect: CountWeights,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            location: CountWeights {
                none: 1.0,
                one: 0.9,
                multiple: 1.0,
            },
            frequency: [0.1, 0.25, 0.50, 0.75, 0.99],
            defect: CountWeights {
                none: 0.5,
                one: 0.8,
                multiple: 1.0,
            },
        }
    }
}

impl WeightTable {
    /// Checks that every weight is finite, the frequency weights strictly
    /// increase, and "no defect" is distinguishable from the other rows.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.location.none,
            self.location.one,
            self.location.multiple,
            self.defect.none,
            self.defect.one,
            self.defect.multiple,
        ];
        if let Some(&bad) = all.iter().chain(&self.frequency).find(|w| !w.is_finite()) {
            return Err(Error::Config(format!("weight {bad} is not finite")));
        }
        if self.frequency.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("frequency weights must strictly increase".into()));
        }
        if self.defect.none == self.defect.one || self.defect.none == self.defect.multiple {
            return Err(Error::Config("the no-defect weight must differ from the others".into()));
        }
        Ok(())
    }

    fn frequency_band(&self, w: f64) -> Option<usize> {
        self.frequency.iter().position(|&v| v == w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTriple {
    pub w_frequencies: f64,
    pub w_location: f64,
    pub w_defect: f64,
}

impl WeightTriple {
    pub fn new(w_frequencies: f64, w_location: f64, w_defect: f64) -> Self {
        WeightTriple {
            w_frequencies,
            w_location,
            w_defect,
        }
    }
}

impl fmt::Display for WeightTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.w_frequencies, self.w_location, self.w_defect)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DefectRating(u8);

impl DefectRating {
    pub const ALL: [DefectRating; 5] = [
        DefectRating(1),
        DefectRating(2),
        DefectRating(3),
        DefectRating(4),
        DefectRating(5),
    ];

    pub fn new(value: u8) -> Option<Self> {
        (1..=5).contains(&value).then_some(DefectRating(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Maintenance action for the rating.
    pub fn action_text(self) -> &'static str {
        match self.0 {
            1 => "Reassess in ten years",
            2 => "Rehabilitate or replace in six to ten years",
            3 => "Rehabilitate or replace in three to five years",
            4 => "Rehabilitate or replace in zero to two years",
            _ => "Rehabilitate or replace immediately",
        }
    }
}

impl TryFrom<u8> for DefectRating {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        DefectRating::new(v).ok_or_else(|| format!("rating {v} outside 1..=5"))
    }
}

impl From<DefectRating> for u8 {
    fn from(r: DefectRating) -> u8 {
        r.0
    }
}

impl fmt::Display for DefectRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingAssignment {
    pub rating: DefectRating,
    /// The triple has a defect but the lowest frequency band, a combination
    /// the lookup table does not list.
    pub gap_row: bool,
}

/// Looks the triple up in the rating table. Weights must equal a value of
/// their table exactly.
pub fn assign_rating(w: &WeightTriple, table: &WeightTable) -> Result<RatingAssignment> {
    let band = table.frequency_band(w.w_frequencies).ok_or(Error::InvalidWeight {
        table: "frequency",
        value: w.w_frequencies,
    })?;
    if !table.location.contains(w.w_location) {
        return Err(Error::InvalidWeight {
            table: "location",
            value: w.w_location,
        });
    }
    if !table.defect.contains(w.w_defect) {
        return Err(Error::InvalidWeight {
            table: "defect",
            value: w.w_defect,
        });
    }
    let (value, gap_row) = if w.w_defect == table.defect.none {
        (1, false)
    } else if band == 0 {
        (1, true)
    } else {
        (band as u8 + 1, false)
    };
    Ok(RatingAssignment {
        rating: DefectRating(value),
        gap_row,
    })
}

/// Frequency term to band index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyBands {
    bands: BTreeMap<String, usize>,
}

impl Default for FrequencyBands {
    fn default() -> Self {
        FrequencyBands::parse(resources::FREQUENCY_BANDS).expect("bundled frequency bands are valid")
    }
}

impl FrequencyBands {
    /// Parses `term <TAB> band` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line, reason: &str| Error::ResourceFormat {
            file: "frequency bands".into(),
            line,
            reason: reason.into(),
        };
        let mut bands = BTreeMap::new();
        for (line, content) in content_lines(text) {
            let (term, band) = content
                .split_once('\t')
                .ok_or_else(|| bad(line, "expected term<TAB>band"))?;
            let term = normalize_term(term);
            let band: usize = band.trim().parse().map_err(|_| bad(line, "band is not an integer"))?;
            if term.is_empty() || band >= FREQUENCY_BANDS {
                return Err(bad(line, "empty term or band out of range"));
            }
            if bands.insert(term, band).is_some() {
                return Err(bad(line, "duplicate term"));
            }
        }
        Ok(FrequencyBands { bands })
    }

    pub fn band(&self, term: &str) -> Option<usize> {
        self.bands.get(term).copied()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, usize)> {
        self.bands.iter().map(|(t, &b)| (t.as_str(), b))
    }
}

fn live(frames: &[EntityFrame], pick: fn(&EntityFrame) -> &Vec<Entity>) -> impl Iterator<Item = &Entity> {
    frames.iter().flat_map(move |f| pick(f).iter()).filter(|e| !e.negated)
}

pub fn weight_location(frames: &[EntityFrame], table: &WeightTable) -> f64 {
    table.location.for_count(live(frames, |f| &f.locations).count())
}

/// Highest band among the non-negated frequency entities, plus the texts of
/// entities that carry no lexicon term and so have no band.
fn frequency_band(frames: &[EntityFrame], bands: &FrequencyBands) -> Result<(usize, Vec<String>)> {
    let mut best = 0;
    let mut unbanded = Vec::new();
    for e in live(frames, |f| &f.frequencies) {
        if e.lexicon_matches.is_empty() {
            match bands.band(&e.text) {
                Some(b) => best = best.max(b),
                None => unbanded.push(e.text.clone()),
            }
            continue;
        }
        for m in &e.lexicon_matches {
            let b = bands
                .band(&m.term)
                .or_else(|| bands.band(&m.seed_root))
                .ok_or_else(|| Error::UnknownFrequencyTerm(m.term.clone()))?;
            best = best.max(b);
        }
    }
    Ok((best, unbanded))
}

pub fn weight_frequency(frames: &[EntityFrame], bands: &FrequencyBands, table: &WeightTable) -> Result<f64> {
    Ok(table.frequency[frequency_band(frames, bands)?.0])
}

/// Distinct defect units: the seed roots of matched lexicon terms, or the
/// entity text when a tagger marked a span without a lexicon match.
fn defect_units(frames: &[EntityFrame]) -> BTreeSet<String> {
    let mut units = BTreeSet::new();
    for e in live(frames, |f| &f.defects) {
        if e.lexicon_matches.is_empty() {
            units.insert(e.text.clone());
        }
        units.extend(e.lexicon_matches.iter().map(|m| m.seed_root.clone()));
    }
    units
}

pub fn weight_defect(frames: &[EntityFrame], table: &WeightTable) -> f64 {
    table.defect.for_count(defect_units(frames).len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatingFlag {
    /// Defect found at the lowest frequency band; rated 1.
    GapRow,
    /// A distance and a keyword location were both found and counted
    /// separately.
    MixedLocationKinds,
    /// A frequency span with no lexicon term; it did not affect the weight.
    UnbandedFrequency { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceFrame {
    pub sentence: usize,
    pub section: String,
    pub text: String,
    pub frame: EntityFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub document_id: String,
    pub tagger: String,
    pub weights: WeightTriple,
    pub rating: DefectRating,
    pub action_text: String,
    /// Counted defect units.
    pub defect_units: Vec<String>,
    pub negated_excluded: usize,
    pub flags: Vec<RatingFlag>,
    pub notes: Vec<String>,
    pub frames: Vec<SentenceFrame>,
}

impl RatingReport {
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.frames.iter().flat_map(|f| f.frame.entities())
    }

    pub fn gap_row(&self) -> bool {
        self.flags.contains(&RatingFlag::GapRow)
    }

    /// The report as an annotation record with the tagger as annotator.
    /// Negated entities are kept.
    pub fn to_record(&self) -> GoldRecord {
        GoldRecord {
            document_id: self.document_id.clone(),
            entities: self
                .entities()
                .map(|e| GoldEntity {
                    entity_type: e.entity_type,
                    span: e.raw_span,
                })
                .collect(),
            rating: self.rating.value(),
            annotator_id: self.tagger.clone(),
        }
    }
}

/// `doc_id,rating` lines with a header, in the given order.
pub fn csv_summary<'a, I: IntoIterator<Item = &'a RatingReport>>(reports: I) -> String {
    let mut out = String::from("doc_id,rating\n");
    for r in reports {
        out.push_str(&format!("{},{}\n", r.document_id, r.rating));
    }
    out
}

const NEGATION_NOTE: &str = "negated entities are excluded from all three weights";

/// Weight tables, frequency bands and the size / distance patterns used to
/// rate documents.
#[derive(Debug, Clone, Default)]
pub struct RatingEngine {
    pub weights: WeightTable,
    pub bands: FrequencyBands,
    pub patterns: PatternTable,
}

impl RatingEngine {
    pub fn new(weights: WeightTable, bands: FrequencyBands, patterns: PatternTable) -> Result<Self> {
        weights.validate()?;
        Ok(RatingEngine {
            weights,
            bands,
            patterns,
        })
    }

    pub fn weights(&self, frames: &[EntityFrame]) -> Result<WeightTriple> {
        Ok(WeightTriple::new(
            weight_frequency(frames, &self.bands, &self.weights)?,
            weight_location(frames, &self.weights),
            weight_defect(frames, &self.weights),
        ))
    }

    /// Rates already extracted sentence frames.
    pub fn rate_frames(&self, document_id: &str, tagger: &str, frames: Vec<SentenceFrame>) -> Result<RatingReport> {
        let plain: Vec<EntityFrame> = frames.iter().map(|f| f.frame.clone()).collect();
        let (band, unbanded) = frequency_band(&plain, &self.bands)?;
        let units = defect_units(&plain);
        let weights = WeightTriple::new(
            self.weights.frequency[band],
            weight_location(&plain, &self.weights),
            self.weights.defect.for_count(units.len()),
        );
        let assignment = assign_rating(&weights, &self.weights)?;

        let mut flags = Vec::new();
        if assignment.gap_row {
            flags.push(RatingFlag::GapRow);
        }
        let sources: BTreeSet<_> = live(&plain, |f| &f.locations)
            .map(|e| e.source == EntitySource::Pattern)
            .collect();
        if sources.len() == 2 {
            flags.push(RatingFlag::MixedLocationKinds);
        }
        flags.extend(unbanded.into_iter().map(|text| RatingFlag::UnbandedFrequency { text }));

        let negated_excluded = plain
            .iter()
            .flat_map(|f| f.entities())
            .filter(|e| e.negated && e.entity_type != EntityType::SizeOfDefect)
            .count();
        Ok(RatingReport {
            document_id: document_id.to_string(),
            tagger: tagger.to_string(),
            weights,
            rating: assignment.rating,
            action_text: assignment.rating.action_text().to_string(),
            defect_units: units.into_iter().collect(),
            negated_excluded,
            flags,
            notes: vec![NEGATION_NOTE.to_string()],
            frames,
        })
    }

    /// Tags every sentence of a preprocessed document, extracts entity frames
    /// and rates them.
    pub fn rate_document(&self, doc: &Document, lexicon: &Lexicon, tagger: &dyn Tagger) -> Result<RatingReport> {
        let mut frames = Vec::with_capacity(doc.sentences.len());
        for (i, s) in doc.sentences.iter().enumerate() {
            let tags = tagger.tag(s, lexicon)?;
            frames.push(SentenceFrame {
                sentence: i,
                section: doc.sections[s.section].name.clone(),
                text: s.text.clone(),
                frame: extract_entities(s, &tags, lexicon, &self.patterns)?,
            });
        }
        self.rate_frames(&doc.id, tagger.name(), frames)
    }

    /// Rates a preprocessed document from annotated entities instead of a
    /// tagger. Sizes and distances still come from the pattern table.
    pub fn rate_gold(&self, doc: &Document, record: &GoldRecord, lexicon: &Lexicon) -> Result<RatingReport> {
        let mut frames = Vec::with_capacity(doc.sentences.len());
        for (i, s) in doc.sentences.iter().enumerate() {
            let tags = gold_tags(s, record);
            frames.push(SentenceFrame {
                sentence: i,
                section: doc.sections[s.section].name.clone(),
                text: s.text.clone(),
                frame: extract_entities(s, &tags, lexicon, &self.patterns)?,
            });
        }
        self.rate_frames(&doc.id, "gold", frames)
    }
}

/// Rates a preprocessed document with the default tables.
pub fn rate_document(doc: &Document, lexicon: &Lexicon, tagger: &dyn Tagger) -> Result<RatingReport> {
    RatingEngine::default().rate_document(doc, lexicon, tagger)
}
