//! Text cleaning, sentence splitting, tokenization, spelling correction and
//! negation scope detection.

use std::collections::BTreeSet;

use crate::corpus::{Document, Sentence, Span, Token};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::resources::{self, content_lines};

const TERMINATORS: [char; 3] = ['.', '!', '?'];

fn is_kept(c: char) -> bool {
    c.is_alphanumeric() || TERMINATORS.contains(&c)
}

/// Replaces every character other than letters, digits and `. ! ?` with a
/// space, collapses runs of whitespace and trims both ends. Case is kept.
pub fn normalize_text(raw: &str) -> String {
    normalize_with_offsets(raw).0
}

/// [`normalize_text`] plus, for every byte of the output, the byte offset in
/// `raw` it came from. Inserted spaces point at the first character they
/// replace.
pub fn normalize_with_offsets(raw: &str) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(raw.len());
    let mut offsets = Vec::with_capacity(raw.len());
    let mut pending_gap: Option<usize> = None;
    for (i, c) in raw.char_indices() {
        if is_kept(c) {
            if let Some(gap) = pending_gap.take() {
                if !out.is_empty() {
                    out.push(' ');
                    offsets.push(gap);
                }
            }
            out.push(c);
            offsets.extend(i..i + c.len_utf8());
        } else if pending_gap.is_none() {
            pending_gap = Some(i);
        }
    }
    (out, offsets)
}

/// Rule-based sentence boundary detector.
///
/// A run of `. ! ?` ends a sentence when it is followed by whitespace and an
/// uppercase letter, or by the end of the text, unless the word it closes is a
/// listed abbreviation (`ft.`, `in.`, ...).
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: BTreeSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_list(resources::ABBREVIATIONS)
    }
}

impl SentenceSplitter {
    pub fn from_list(text: &str) -> Self {
        let abbreviations = content_lines(text).map(|(_, l)| l.trim().to_lowercase()).collect();
        SentenceSplitter { abbreviations }
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.sentence_spans(text)
            .into_iter()
            .map(|s| &text[s.start..s.end])
            .collect()
    }

    /// Byte spans of each sentence, without surrounding whitespace.
    pub fn sentence_spans(&self, text: &str) -> Vec<Span> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut k = 0;
        while k < chars.len() {
            let (pos, c) = chars[k];
            if start.is_none() && !c.is_whitespace() {
                start = Some(pos);
            }
            if TERMINATORS.contains(&c) {
                let mut last = k;
                while last + 1 < chars.len() && TERMINATORS.contains(&chars[last + 1].1) {
                    last += 1;
                }
                let end = chars[last].0 + chars[last].1.len_utf8();
                let rest = &chars[last + 1..];
                let ws = rest.iter().take_while(|(_, c)| c.is_whitespace()).count();
                let at_end = ws == rest.len();
                let capital_next = ws > 0 && rest[ws].1.is_uppercase();
                if (at_end || capital_next) && !self.closes_abbreviation(text, end, at_end) {
                    if let Some(s) = start.take() {
                        spans.push(Span::new(s, end));
                    }
                }
                k = last + 1;
                continue;
            }
            k += 1;
        }
        if let Some(s) = start {
            let end = s + text[s..].trim_end().len();
            if end > s {
                spans.push(Span::new(s, end));
            }
        }
        spans
    }

    fn closes_abbreviation(&self, text: &str, end: usize, at_end: bool) -> bool {
        if at_end {
            return false;
        }
        let word_start = text[..end].rfind(char::is_whitespace).map_or(0, |i| i + 1);
        self.abbreviations.contains(&text[word_start..end].to_lowercase())
    }
}

/// Splits with the bundled abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default()
        .split(text)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// Whitespace tokenization; a trailing run of `. ! ?` on a word becomes its
/// own token. `raw_span` is set equal to `char_span`.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut push = |start: usize, end: usize| {
        let surface = &sentence[start..end];
        tokens.push(Token {
            surface: surface.to_string(),
            normalized: surface.to_lowercase(),
            char_span: Span::new(start, end),
            raw_span: Span::new(start, end),
        });
    };
    let mut offset = 0;
    for word in sentence.split_inclusive(char::is_whitespace) {
        let trimmed = word.trim_end();
        let start = offset;
        offset += word.len();
        if trimmed.is_empty() {
            continue;
        }
        let body = trimmed.trim_end_matches(TERMINATORS);
        if body.is_empty() || body.len() == trimmed.len() {
            push(start, start + trimmed.len());
        } else {
            push(start, start + body.len());
            push(start + body.len(), start + trimmed.len());
        }
    }
    tokens
}

/// Known words for spelling correction.
#[derive(Debug, Clone)]
pub struct SpellVocabulary {
    known_terms: BTreeSet<String>,
    max_edit_distance: usize,
}

/// Tokens shorter than this are never corrected; short function words sit
/// too close to each other in edit distance.
pub const MIN_CORRECTABLE_LEN: usize = 4;

impl SpellVocabulary {
    pub fn new<I, S>(terms: I, max_edit_distance: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if !(1..=2).contains(&max_edit_distance) {
            return Err(Error::Config(format!(
                "max edit distance must be 1 or 2, got {max_edit_distance}"
            )));
        }
        let known_terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if known_terms.is_empty() {
            return Err(Error::Config("spelling vocabulary is empty".into()));
        }
        Ok(SpellVocabulary {
            known_terms,
            max_edit_distance,
        })
    }

    /// Base word list plus every word of every lexicon term.
    pub fn from_lexicon(base_words: &str, lexicon: &Lexicon, max_edit_distance: usize) -> Result<Self> {
        let base = content_lines(base_words).map(|(_, l)| l.trim().to_string());
        let lexical = lexicon
            .entries()
            .flat_map(|e| e.term.split(' ').map(str::to_string).collect::<Vec<_>>());
        SpellVocabulary::new(base.chain(lexical), max_edit_distance)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.known_terms.contains(term)
    }

    pub fn max_edit_distance(&self) -> usize {
        self.max_edit_distance
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.known_terms.iter().map(String::as_str)
    }

    /// Closest known term within the distance bound; ties go to the
    /// lexicographically smallest term.
    pub fn suggest(&self, word: &str) -> Option<&str> {
        let len = word.chars().count();
        let mut best: Option<(usize, &str)> = None;
        for term in &self.known_terms {
            if term.chars().count().abs_diff(len) > self.max_edit_distance {
                continue;
            }
            let d = strsim::osa_distance(word, term);
            if d <= self.max_edit_distance && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, term));
            }
        }
        best.map(|(_, t)| t)
    }
}

/// Replaces `normalized` with the closest vocabulary term when the token is
/// an out-of-vocabulary alphabetic word of at least
/// [`MIN_CORRECTABLE_LEN`] characters. Optimal string alignment distance is
/// used, so a swap of adjacent letters costs 1.
pub fn correct_spelling(token: &Token, vocab: &SpellVocabulary) -> Token {
    let word = token.normalized.as_str();
    if vocab.contains(word) || word.chars().count() < MIN_CORRECTABLE_LEN || !word.chars().all(char::is_alphabetic) {
        return token.clone();
    }
    match vocab.suggest(word) {
        Some(term) => Token {
            normalized: term.to_string(),
            ..token.clone()
        },
        None => token.clone(),
    }
}

/// Negation trigger phrases and scope terminators, stored as token sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationTriggerSet {
    pub pre_triggers: Vec<Vec<String>>,
    pub scope_terminators: Vec<Vec<String>>,
    /// Maximum number of tokens a scope covers.
    pub window: usize,
}

pub const DEFAULT_NEGATION_WINDOW: usize = 5;

impl Default for NegationTriggerSet {
    fn default() -> Self {
        Self::parse(resources::NEGATION_TRIGGERS).expect("bundled negation triggers are valid")
    }
}

impl NegationTriggerSet {
    /// Reads `pre: <phrase>` and `term: <phrase>` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = NegationTriggerSet {
            pre_triggers: Vec::new(),
            scope_terminators: Vec::new(),
            window: DEFAULT_NEGATION_WINDOW,
        };
        for (line, content) in content_lines(text) {
            let bad = |reason: &str| Error::ResourceFormat {
                file: "negation triggers".into(),
                line,
                reason: reason.into(),
            };
            let (kind, phrase) = content
                .split_once(':')
                .ok_or_else(|| bad("expected `pre:` or `term:` prefix"))?;
            let phrase: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
            if phrase.is_empty() {
                return Err(bad("empty phrase"));
            }
            if phrase.iter().any(|w| *w != w.to_lowercase()) {
                return Err(bad("phrases must be lowercase"));
            }
            match kind.trim() {
                "pre" => set.pre_triggers.push(phrase),
                "term" => set.scope_terminators.push(phrase),
                other => return Err(bad(&format!("unknown kind `{other}`"))),
            }
        }
        Ok(set)
    }

    fn longest_at(phrases: &[Vec<String>], tokens: &[&str], at: usize) -> Option<usize> {
        phrases
            .iter()
            .filter(|p| tokens.len() - at >= p.len() && tokens[at..at + p.len()] == p[..])
            .map(Vec::len)
            .max()
    }
}

/// Token-index scopes (half-open) negated by pre-triggers.
///
/// Each trigger opens a scope at the next token which runs until a
/// terminator, `window` tokens, or the end of the sentence, whichever comes
/// first. Overlapping scopes are merged.
pub fn detect_negation(tokens: &[&str], triggers: &NegationTriggerSet) -> Vec<Span> {
    let mut scopes: Vec<Span> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let Some(len) = NegationTriggerSet::longest_at(&triggers.pre_triggers, tokens, i) else {
            i += 1;
            continue;
        };
        let start = i + len;
        let mut end = start;
        while end < tokens.len()
            && end - start < triggers.window
            && NegationTriggerSet::longest_at(&triggers.scope_terminators, tokens, end).is_none()
        {
            end += 1;
        }
        if end > start {
            scopes.push(Span::new(start, end));
        }
        i += len;
    }
    scopes.sort();
    let mut merged: Vec<Span> = Vec::with_capacity(scopes.len());
    for s in scopes {
        match merged.last_mut() {
            Some(last) if s.start < last.end => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }
    merged
}

/// Runs normalization, sentence splitting, tokenization, spelling correction
/// and negation detection over every section of a document.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub splitter: SentenceSplitter,
    pub vocab: SpellVocabulary,
    pub triggers: NegationTriggerSet,
}

pub const DEFAULT_MAX_EDIT_DISTANCE: usize = 2;

impl Preprocessor {
    /// Bundled abbreviations, base words and triggers, plus the lexicon's words.
    pub fn with_lexicon(lexicon: &Lexicon) -> Result<Self> {
        Ok(Preprocessor {
            splitter: SentenceSplitter::default(),
            vocab: SpellVocabulary::from_lexicon(resources::BASE_WORDS, lexicon, DEFAULT_MAX_EDIT_DISTANCE)?,
            triggers: NegationTriggerSet::default(),
        })
    }

    pub fn process(&self, mut doc: Document) -> Document {
        doc.sentences = self.sentences(&doc);
        doc
    }

    fn sentences(&self, doc: &Document) -> Vec<Sentence> {
        let mut out = Vec::new();
        for (section_idx, section) in doc.sections.iter().enumerate() {
            let (norm, offsets) = normalize_with_offsets(doc.body(section));
            for span in self.splitter.sentence_spans(&norm) {
                let text = &norm[span.start..span.end];
                let tokens: Vec<Token> = tokenize(text)
                    .into_iter()
                    .map(|mut t| {
                        let first = span.start + t.char_span.start;
                        let last = span.start + t.char_span.end - 1;
                        t.raw_span = Span::new(
                            section.body.start + offsets[first],
                            section.body.start + offsets[last] + 1,
                        );
                        correct_spelling(&t, &self.vocab)
                    })
                    .collect();
                let words: Vec<&str> = tokens.iter().map(|t| t.normalized.as_str()).collect();
                let negation_scopes = detect_negation(&words, &self.triggers);
                out.push(Sentence {
                    text: text.to_string(),
                    section: section_idx,
                    tokens,
                    negation_scopes,
                });
            }
        }
        out
    }
}
