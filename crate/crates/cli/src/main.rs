//! `pipescore`: build lexicons, generate synthetic corpora, train the Bi-LSTM
//! tagger, rate documents and evaluate predictions.
//!
//! Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pipescore",
    version,
    about = "Defect extraction and rating for pipe inspection documents"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expand seed terms into the lexicon file.
    BuildLexicon(BuildLexiconArgs),
    /// Write a synthetic annotated corpus.
    Generate(GenerateArgs),
    /// Train the Bi-LSTM tagger on the training split.
    Train(TrainArgs),
    /// Rate documents and write reports.
    Rate(RateArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct BuildLexiconArgs {
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long)]
    pub blacklist: Option<PathBuf>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Lexicon file to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of documents.
    #[arg(short = 'n', long)]
    pub count: Option<i64>,
    /// Directory for the document files.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Gold file to write; defaults to `gold.tsv` in the output directory
    /// when `--output` is given.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Model file to write. The loss log and split are written next to it.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaggerKind {
    Dict,
    Bilstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Document file or directory of `*.txt` documents.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dict")]
    pub tagger: TaggerKind,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Rate only one side of the split written by `train`.
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    /// Split file; defaults to the one next to the model.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions in the gold annotation format.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Documents the annotations refer to.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Also report strict span matches.
    #[arg(long)]
    pub spans: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result = settings::Settings::load(cli.config.as_deref(), cli.seed).and_then(|s| match &cli.command {
        Command::BuildLexicon(a) => commands::build_lexicon(&s, a),
        Command::Generate(a) => commands::generate(&s, a),
        Command::Train(a) => commands::train(&s, a),
        Command::Rate(a) => commands::rate(&s, a),
        Command::Evaluate(a) => commands::evaluate(&s, a),
    });
    match result {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
