//! Inspection documents, gold annotations and train/test splits.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Section headers recognized at the start of a line, followed by `:`.
pub const SECTION_NAMES: [&str; 8] = [
    "Pipe Characteristics",
    "Emergency Repair",
    "Smoke Testing Assessment",
    "Defects",
    "Composite Assessment",
    "Criticality Assessment",
    "Capacity",
    "Summary",
];

/// Section name for text that precedes any recognized header.
pub const UNSECTIONED: &str = "Unsectioned";

/// Half-open byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    /// Header text including the trailing colon. Empty for [`UNSECTIONED`].
    pub header: Span,
    pub body: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Lowercased and spell-corrected form.
    pub normalized: String,
    /// Offsets into [`Sentence::text`].
    pub char_span: Span,
    /// Offsets into [`Document::raw`].
    pub raw_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    /// Index into [`Document::sections`].
    pub section: usize,
    pub tokens: Vec<Token>,
    /// Token-index ranges, half-open, sorted and disjoint.
    pub negation_scopes: Vec<Span>,
}

impl Sentence {
    pub fn normalized_tokens(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.normalized.as_str()).collect()
    }

    pub fn is_negated(&self, tokens: Span) -> bool {
        self.negation_scopes.iter().any(|s| s.overlaps(&tokens))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw: String,
    pub sections: Vec<Section>,
    /// Filled by [`crate::preprocess::Preprocessor::process`].
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn section_text(&self, name: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.raw[s.body.start..s.body.end])
    }

    pub fn body(&self, section: &Section) -> &str {
        &self.raw[section.body.start..section.body.end]
    }
}

/// Splits a raw document into sections.
///
/// A header is a line whose text up to the first `:` equals one of
/// [`SECTION_NAMES`] ignoring case and surrounding whitespace. Any other line,
/// including unknown `Name:` lines, is body text of the current section.
pub fn parse_document(raw: &str, id: &str) -> Result<Document> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyDocument(id.to_string()));
    }

    let mut headers: Vec<(String, Span)> = Vec::new();
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        if let Some(colon) = line.find(':') {
            let candidate = line[..colon].trim();
            if let Some(name) = SECTION_NAMES.iter().find(|name| name.eq_ignore_ascii_case(candidate)) {
                let lead = line.len() - line.trim_start().len();
                headers.push((name.to_string(), Span::new(offset + lead, offset + colon + 1)));
            }
        }
        offset += line.len();
    }

    let mut sections = Vec::with_capacity(headers.len() + 1);
    let first_header = headers.first().map_or(raw.len(), |(_, h)| h.start);
    if !raw[..first_header].trim().is_empty() {
        sections.push(Section {
            name: UNSECTIONED.to_string(),
            header: Span::new(0, 0),
            body: Span::new(0, first_header),
        });
    }
    for (i, (name, header)) in headers.iter().enumerate() {
        let end = headers.get(i + 1).map_or(raw.len(), |(_, next)| next.start);
        sections.push(Section {
            name: name.clone(),
            header: *header,
            body: Span::new(header.end, end),
        });
    }

    Ok(Document {
        id: id.to_string(),
        raw: raw.to_string(),
        sections,
        sentences: Vec::new(),
    })
}

/// Reads every `*.txt` file in `dir` as a document whose id is the file stem.
/// Results are sorted by id; unreadable or empty files are returned as errors.
pub fn load_documents(dir: &Path) -> Result<Vec<(String, Result<Document>)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let doc = fs::read_to_string(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|raw| parse_document(&raw, &id));
            (id, doc)
        })
        .collect())
}

/// Keeps the documents accepted by `keep`.
///
/// This is the hook for corpus-specific completeness rules, such as dropping
/// records without usable defect location information.
pub fn filter_documents<F>(docs: Vec<Document>, keep: F) -> Vec<Document>
where
    F: Fn(&Document) -> bool,
{
    docs.into_iter().filter(|d| keep(d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityType {
    Defect,
    SizeOfDefect,
    LocationOfDefect,
    FrequencyOfDefects,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [
        EntityType::Defect,
        EntityType::SizeOfDefect,
        EntityType::LocationOfDefect,
        EntityType::FrequencyOfDefects,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Defect => "Defect",
            EntityType::SizeOfDefect => "SizeOfDefect",
            EntityType::LocationOfDefect => "LocationOfDefect",
            EntityType::FrequencyOfDefects => "FrequencyOfDefects",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        EntityType::ALL.into_iter().find(|t| t.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntity {
    pub entity_type: EntityType,
    /// Byte offsets into the raw document file.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub document_id: String,
    pub entities: Vec<GoldEntity>,
    pub rating: u8,
    pub annotator_id: String,
}

impl GoldRecord {
    /// Checks that every span lies inside `doc` on character boundaries.
    pub fn validate_against(&self, doc: &Document) -> Result<()> {
        for entity in &self.entities {
            let Span { start, end } = entity.span;
            if end > doc.raw.len() || !doc.raw.is_char_boundary(start) || !doc.raw.is_char_boundary(end) {
                return Err(Error::InvalidSpan {
                    line: 0,
                    span: format!("{}:{}-{} in `{}`", entity.entity_type, start, end, doc.id),
                });
            }
        }
        Ok(())
    }
}

/// Parses the tab-separated gold annotation format:
///
/// ```text
/// doc_id <TAB> rating <TAB> type:start-end[,type:start-end...] <TAB> annotator_id
/// ```
///
/// An empty entity field (or `-`) means no entities. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_gold(raw: &str) -> Result<Vec<GoldRecord>> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (line_no, line) in crate::resources::content_lines(raw) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::GoldFormat {
                line: line_no,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let document_id = fields[0].trim();
        if document_id.is_empty() {
            return Err(Error::GoldFormat {
                line: line_no,
                reason: "empty document id".into(),
            });
        }
        let rating = match fields[1].trim().parse::<u8>() {
            Ok(r @ 1..=5) => r,
            _ => {
                return Err(Error::InvalidRating {
                    line: line_no,
                    value: fields[1].trim().to_string(),
                })
            }
        };
        let entities = parse_entity_field(fields[2].trim(), line_no)?;
        let annotator_id = fields[3].trim().to_string();
        if !seen.insert((document_id.to_string(), annotator_id.clone())) {
            return Err(Error::DuplicateRecord {
                document: document_id.to_string(),
                annotator: annotator_id,
            });
        }
        records.push(GoldRecord {
            document_id: document_id.to_string(),
            entities,
            rating,
            annotator_id,
        });
    }
    Ok(records)
}

fn parse_entity_field(field: &str, line: usize) -> Result<Vec<GoldEntity>> {
    if field.is_empty() || field == "-" {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|item| {
            let bad = || Error::InvalidSpan {
                line,
                span: item.to_string(),
            };
            let (kind, range) = item.trim().split_once(':').ok_or_else(bad)?;
            let entity_type = kind.parse::<EntityType>().map_err(|_| bad())?;
            let (start, end) = range.split_once('-').ok_or_else(bad)?;
            let start: usize = start.parse().map_err(|_| bad())?;
            let end: usize = end.parse().map_err(|_| bad())?;
            if end <= start {
                return Err(bad());
            }
            Ok(GoldEntity {
                entity_type,
                span: Span::new(start, end),
            })
        })
        .collect()
}

/// Serializes records in the format read by [`parse_gold`].
pub fn write_gold(records: &[GoldRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let entities = if r.entities.is_empty() {
            "-".to_string()
        } else {
            r.entities
                .iter()
                .map(|e| format!("{}:{}-{}", e.entity_type, e.span.start, e.span.end))
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.document_id, r.rating, entities, r.annotator_id
        ));
    }
    out
}

/// First record per document id, in input order of appearance.
pub fn primary_records(records: &[GoldRecord]) -> Vec<&GoldRecord> {
    let mut seen = BTreeSet::new();
    records.iter().filter(|r| seen.insert(r.document_id.as_str())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Seeded shuffle of the sorted ids, cut at `round(ratio * n)`.
///
/// Both parts keep at least one document. The returned lists are sorted.
pub fn split_corpus(ids: &[String], ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let mut shuffled: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if shuffled.len() < 2 {
        return Err(Error::CorpusTooSmall(shuffled.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = shuffled.split_off(n_train);
    let mut train = shuffled;
    train.sort();
    test.sort();
    Ok(CorpusSplit { train, test, seed })
}
