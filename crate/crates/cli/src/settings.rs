use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use pipescore_core::config::PipelineConfig;
use pipescore_core::lexicon::{parse_seeds, Blacklist, Seed, SynonymGraph};
use pipescore_core::preprocess::{NegationTriggerSet, SentenceSplitter, SpellVocabulary, DEFAULT_MAX_EDIT_DISTANCE};
use pipescore_core::rating::FrequencyBands;
use pipescore_core::resources;
use pipescore_core::tagger::PatternTable;
use pipescore_core::{Lexicon, Preprocessor, RatingEngine};

/// The loaded configuration with flag overrides applied.
pub struct Settings {
    pub config: PipelineConfig,
}

pub fn read(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} `{}`", path.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write `{}`", path.display()))
}

/// Bundled text unless a path is configured, in which case it must exist.
fn resource(path: Option<&Path>, bundled: &'static str, what: &str) -> Result<String> {
    match path {
        Some(p) => read(p, what),
        None => Ok(bundled.to_string()),
    }
}

impl Settings {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut config = match path {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("cannot load config `{}`", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = seed {
            config.seed = seed;
        }
        Ok(Settings { config })
    }

    pub fn paths(&self) -> &pipescore_core::config::Paths {
        &self.config.paths
    }

    pub fn seeds(&self, flag: Option<&Path>) -> Result<Vec<Seed>> {
        let path = flag.or(self.paths().seeds.as_deref());
        Ok(parse_seeds(&resource(path, resources::SEEDS, "seed file")?)?)
    }

    pub fn graph(&self, flag: Option<&Path>) -> Result<SynonymGraph> {
        let path = flag.or(self.paths().synonyms.as_deref());
        Ok(SynonymGraph::parse(&resource(
            path,
            resources::SYNONYM_GRAPH,
            "synonym graph",
        )?)?)
    }

    pub fn blacklist(&self, flag: Option<&Path>) -> Result<Blacklist> {
        let path = flag.or(self.paths().blacklist.as_deref());
        Ok(Blacklist::parse(&resource(path, resources::BLACKLIST, "blacklist")?)?)
    }

    pub fn lexicon(&self, flag: Option<&Path>) -> Result<Lexicon> {
        let path = flag.unwrap_or(&self.paths().lexicon);
        if !path.exists() {
            bail!(
                "lexicon `{}` not found; run `pipescore build-lexicon` first",
                path.display()
            );
        }
        Lexicon::load(path).with_context(|| format!("cannot load lexicon `{}`", path.display()))
    }

    pub fn preprocessor(&self, lexicon: &Lexicon) -> Result<Preprocessor> {
        let paths = self.paths();
        let triggers = resource(
            paths.triggers.as_deref(),
            resources::NEGATION_TRIGGERS,
            "negation triggers",
        )?;
        let abbreviations = resource(
            paths.abbreviations.as_deref(),
            resources::ABBREVIATIONS,
            "abbreviation list",
        )?;
        Ok(Preprocessor {
            splitter: SentenceSplitter::from_list(&abbreviations),
            vocab: SpellVocabulary::from_lexicon(resources::BASE_WORDS, lexicon, DEFAULT_MAX_EDIT_DISTANCE)?,
            triggers: NegationTriggerSet::parse(&triggers)?,
        })
    }

    pub fn engine(&self) -> Result<RatingEngine> {
        let paths = self.paths();
        let bands = resource(
            paths.frequency_bands.as_deref(),
            resources::FREQUENCY_BANDS,
            "frequency bands",
        )?;
        let patterns = resource(paths.patterns.as_deref(), resources::SIZE_PATTERNS, "pattern table")?;
        Ok(RatingEngine::new(
            self.config.weights.clone(),
            FrequencyBands::parse(&bands)?,
            PatternTable::parse(&patterns)?,
        )?)
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        self.config.stage_seed(stage)
    }
}

/// `flag` if given, else the configured path.
pub fn pick(flag: &Option<PathBuf>, configured: &Path) -> PathBuf {
    flag.clone().unwrap_or_else(|| configured.to_path_buf())
}
