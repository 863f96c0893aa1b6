//! Structured defect extraction and defect rating for wastewater pipe
//! inspection documents.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`corpus`] parses raw documents into sections and reads gold annotations.
//! 2. [`preprocess`] normalizes text, splits sentences, tokenizes, corrects
//!    spelling and marks negation scopes.
//! 3. [`lexicon`] builds the defect / location / frequency vocabulary from seed
//!    terms by morphological and synonym-graph expansion.
//! 4. [`tagger`] labels tokens with a dictionary tagger or a Bi-LSTM and groups
//!    the results into per-sentence entity frames.
//! 5. [`rating`] turns the frames into a weight triple and a 1-5 defect rating.
//!
//! [`evaluation`] scores entity extraction and ratings against gold data, and
//! [`generator`] builds synthetic annotated corpora.

pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod lexicon;
pub mod preprocess;
pub mod rating;
pub mod resources;
pub mod tagger;

pub use corpus::{Document, EntityType, GoldEntity, GoldRecord, Section, Sentence, Token};
pub use error::{Error, Result};
pub use lexicon::{Category, Lexicon, LexiconEntry, Origin};
pub use preprocess::Preprocessor;
pub use rating::{DefectRating, RatingEngine, RatingReport, WeightTable, WeightTriple};
pub use tagger::{DictionaryTagger, Entity, EntityFrame, Tag, Tagger, TaggerModel};
