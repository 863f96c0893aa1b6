use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the extraction and rating pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("document `{0}` is empty")]
    EmptyDocument(String),

    #[error("line {line}: rating {value} is outside 1..=5")]
    InvalidRating { line: usize, value: String },

    #[error("line {line}: malformed entity span `{span}`")]
    InvalidSpan { line: usize, span: String },

    #[error("line {line}: malformed gold record: {reason}")]
    GoldFormat { line: usize, reason: String },

    #[error("duplicate gold record for document `{document}` and annotator `{annotator}`")]
    DuplicateRecord { document: String, annotator: String },

    #[error("corpus needs at least 2 documents, got {0}")]
    CorpusTooSmall(usize),

    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),

    #[error("a lexicon with at least one entry is required")]
    LexiconRequired,

    #[error("lexicon file line {line}: {reason}")]
    LexiconFormat { line: usize, reason: String },

    #[error("{file} line {line}: {reason}")]
    ResourceFormat { file: String, line: usize, reason: String },

    #[error("invalid regular expression in pattern table: {0}")]
    Pattern(#[from] regex::Error),

    #[error("non-finite value in {0}")]
    NumericalError(&'static str),

    #[error("cannot run the tagger on an empty sequence")]
    EmptySequence,

    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    AlignmentError { left: usize, right: usize },

    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("frequency term `{0}` has no band in the frequency table")]
    UnknownFrequencyTerm(String),

    #[error("weight {value} is not a valid {table} weight")]
    InvalidWeight { table: &'static str, value: f64 },

    #[error("no gold record for document `{0}`")]
    MissingGold(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
