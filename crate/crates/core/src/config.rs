//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! max_depth = 2
//!
//! [paths]
//! synonyms = "resources/synonyms.tsv"
//! lexicon = "work/lexicon.tsv"
//!
//! [train]
//! epochs = 10
//!
//! [weights]
//! frequency = [0.1, 0.25, 0.5, 0.75, 0.99]
//! ```
//!
//! Every key is optional. Relative paths are resolved against the directory
//! of the config file. Unset resource paths fall back to the bundled files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::lexicon::DEFAULT_MAX_DEPTH;
use crate::rating::WeightTable;
use crate::tagger::{ModelDims, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub seeds: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub blacklist: Option<PathBuf>,
    pub triggers: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub frequency_bands: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub lexicon: PathBuf,
    pub model: PathBuf,
    /// Directory of `*.txt` documents.
    pub corpus: PathBuf,
    pub gold: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            seeds: None,
            synonyms: None,
            blacklist: None,
            triggers: None,
            abbreviations: None,
            frequency_bands: None,
            patterns: None,
            lexicon: "lexicon.tsv".into(),
            model: "model.bin".into(),
            corpus: "corpus".into(),
            gold: "corpus/gold.tsv".into(),
            output: "out".into(),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.seeds,
            &mut self.synonyms,
            &mut self.blacklist,
            &mut self.triggers,
            &mut self.abbreviations,
            &mut self.frequency_bands,
            &mut self.patterns,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
        for p in [
            &mut self.lexicon,
            &mut self.model,
            &mut self.corpus,
            &mut self.gold,
            &mut self.output,
        ] {
            join(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub word_dim: usize,
    pub dict_dim: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: Option<f64>,
    pub init_range: f64,
    pub min_word_count: usize,
    /// Fraction of documents used for training.
    pub split_ratio: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            word_dim: t.dims.word,
            dict_dim: t.dims.dict,
            hidden: t.dims.hidden,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            clip_norm: t.clip_norm,
            init_range: t.init_range,
            min_word_count: t.min_word_count,
            split_ratio: 0.8,
        }
    }
}

impl TrainSettings {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            dims: ModelDims {
                word: self.word_dim,
                dict: self.dict_dim,
                hidden: self.hidden,
            },
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            clip_norm: self.clip_norm,
            init_range: self.init_range,
            min_word_count: self.min_word_count,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub max_depth: u32,
    pub paths: Paths,
    pub train: TrainSettings,
    pub weights: WeightTable,
    pub generator: GeneratorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            paths: Paths::default(),
            train: TrainSettings::default(),
            weights: WeightTable::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.weights.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = PipelineConfig::parse(&text)?;
        config.paths.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sub-seed for one pipeline stage.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        stage_seed(self.seed, stage)
    }
}

/// Mixes `seed` with a stage name (FNV-1a over the name).
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::parse("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        let t = c.train.to_train_config(0);
        assert_eq!((t.dims.word, t.dims.dict, t.dims.hidden), (200, 100, 300));
        assert_eq!((t.batch_size, t.epochs), (100, 10));
        assert_eq!(t.learning_rate, 0.005);
        assert_eq!(c.max_depth, 2);
    }

    #[test]
    fn overrides_and_round_trip() {
        let c = PipelineConfig::parse(
            "seed = 9\n[train]\nepochs = 3\n[weights.location]\nnone = 1.0\none = 0.9\nmultiple = 1.0\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(PipelineConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_weights() {
        assert!(PipelineConfig::parse("colour = 1").is_err());
        assert!(PipelineConfig::parse("[weights]\nfrequency = [0.5, 0.25, 0.5, 0.75, 0.99]").is_err());
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(&path, "[paths]\nsynonyms = \"g.tsv\"\nlexicon = \"/abs/lex.tsv\"\n").unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.paths.synonyms.unwrap(), dir.path().join("g.tsv"));
        assert_eq!(c.paths.lexicon, PathBuf::from("/abs/lex.tsv"));
        assert_eq!(c.paths.model, dir.path().join("model.bin"));
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, "train"), stage_seed(1, "split"));
        assert_ne!(stage_seed(1, "train"), stage_seed(2, "train"));
        assert_eq!(stage_seed(1, "train"), stage_seed(1, "train"));
    }
}
