use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pipescore_core::corpus::{
    load_documents, parse_document, parse_gold, primary_records, split_corpus, write_gold, CorpusSplit,
};
use pipescore_core::evaluation::{evaluate_entities, evaluate_ratings, metrics_csv, EvaluationReport};
use pipescore_core::generator::generate_with;
use pipescore_core::lexicon::expand_synonyms_with_report;
use pipescore_core::rating::csv_summary;
use pipescore_core::tagger::{train as train_tagger, training_tags};
use pipescore_core::{Category, Document, GoldRecord, Preprocessor, RatingReport, Tagger, TaggerModel};

use crate::settings::{pick, read, write, Settings};
use crate::{BuildLexiconArgs, EvaluateArgs, GenerateArgs, RateArgs, Subset, TaggerKind, TrainArgs};

pub enum Outcome {
    Success,
    /// Some inputs failed; the message says which.
    Partial(String),
}

pub fn build_lexicon(s: &Settings, args: &BuildLexiconArgs) -> Result<Outcome> {
    let seeds = s.seeds(args.seeds.as_deref())?;
    let graph = s.graph(args.synonyms.as_deref())?;
    let blacklist = s.blacklist(args.blacklist.as_deref())?;
    let depth = args.max_depth.unwrap_or(s.config.max_depth);
    let (lexicon, report) = expand_synonyms_with_report(&seeds, &graph, &blacklist, depth)?;
    for (seed, antonyms) in &report.antonyms {
        log::info!(
            "{seed}: antonyms not expanded: {}",
            antonyms.iter().cloned().collect::<Vec<_>>().join(", ")
        );
    }
    let out = pick(&args.output, &s.paths().lexicon);
    lexicon
        .save(&out)
        .with_context(|| format!("cannot write lexicon `{}`", out.display()))?;
    println!("wrote {} entries to {}", lexicon.len(), out.display());
    for c in Category::ALL {
        println!("  {c}: {}", lexicon.count(c));
    }
    if !report.missing_seeds.is_empty() {
        println!(
            "  {} seeds are not in the synonym graph and were not expanded",
            report.missing_seeds.len()
        );
    }
    Ok(Outcome::Success)
}

pub fn generate(s: &Settings, args: &GenerateArgs) -> Result<Outcome> {
    let count = args.count.unwrap_or(s.config.generator.count as i64);
    if count <= 0 {
        bail!("document count must be positive, got {count}");
    }
    let lexicon = s.lexicon(args.lexicon.as_deref())?;
    let engine = s.engine()?;
    let mut config = s.config.generator.clone();
    config.count = count as usize;
    let corpus = generate_with(&config, &lexicon, &engine, s.stage_seed("generate"))?;

    let dir = pick(&args.output, &s.paths().corpus);
    let gold = match (&args.gold, &args.output) {
        (Some(g), _) => g.clone(),
        (None, Some(o)) => o.join("gold.tsv"),
        (None, None) => s.paths().gold.clone(),
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    for doc in &corpus.documents {
        write(&dir.join(format!("{}.txt", doc.id)), &doc.raw)?;
    }
    write(&gold, write_gold(&corpus.records))?;

    let mut histogram = [0usize; 5];
    for r in primary_records(&corpus.records) {
        histogram[usize::from(r.rating) - 1] += 1;
    }
    println!(
        "wrote {} documents to {} and gold to {}",
        corpus.documents.len(),
        dir.display(),
        gold.display()
    );
    println!("  ratings 1-5: {histogram:?}");
    Ok(Outcome::Success)
}

/// `(document id, message)` for documents that could not be processed.
type Failures = Vec<(String, String)>;

/// Loads and preprocesses every readable document in `dir`; failures are
/// returned separately.
fn load_corpus(dir: &Path, pre: &Preprocessor) -> Result<(Vec<Document>, Failures)> {
    if !dir.is_dir() {
        bail!("corpus directory `{}` not found", dir.display());
    }
    let loaded = load_documents(dir)?;
    let mut failed = Vec::new();
    let raw: Vec<Document> = loaded
        .into_iter()
        .filter_map(|(id, d)| d.map_err(|e| failed.push((id, e.to_string()))).ok())
        .collect();
    let docs = raw.into_par_iter().map(|d| pre.process(d)).collect();
    Ok((docs, failed))
}

fn load_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    let text = read(path, "gold file")?;
    parse_gold(&text).with_context(|| format!("in gold file `{}`", path.display()))
}

fn first_per_document(records: &[GoldRecord]) -> BTreeMap<String, GoldRecord> {
    primary_records(records)
        .into_iter()
        .map(|r| (r.document_id.clone(), r.clone()))
        .collect()
}

fn split_path(model: &Path) -> PathBuf {
    model.with_extension("split.json")
}

fn loss_path(model: &Path) -> PathBuf {
    model.with_extension("loss.tsv")
}

pub fn train(s: &Settings, args: &TrainArgs) -> Result<Outcome> {
    let lexicon = s.lexicon(args.lexicon.as_deref())?;
    let pre = s.preprocessor(&lexicon)?;
    let engine = s.engine()?;
    let corpus_dir = pick(&args.corpus, &s.paths().corpus);
    let (docs, failed) = load_corpus(&corpus_dir, &pre)?;
    for (id, e) in &failed {
        log::warn!("skipping {id}: {e}");
    }
    let gold = first_per_document(&load_gold(&pick(&args.gold, &s.paths().gold))?);
    let docs: Vec<Document> = docs.into_iter().filter(|d| gold.contains_key(&d.id)).collect();
    if docs.len() < 2 {
        bail!("training needs at least 2 annotated documents, found {}", docs.len());
    }

    let ratio = args.split_ratio.unwrap_or(s.config.train.split_ratio);
    let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    let split = split_corpus(&ids, ratio, s.stage_seed("split"))?;
    let train_ids: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    let examples: Vec<_> = docs
        .iter()
        .filter(|d| train_ids.contains(d.id.as_str()))
        .flat_map(|d| {
            let record = &gold[&d.id];
            d.sentences
                .iter()
                .filter(|s| !s.tokens.is_empty())
                .map(|sentence| (sentence.clone(), training_tags(sentence, record, &engine.patterns)))
        })
        .collect();
    if examples.is_empty() {
        bail!("the training split has no sentences");
    }

    let mut config = s.config.train.to_train_config(s.stage_seed("train"));
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    let start = Instant::now();
    let outcome = train_tagger(&examples, &lexicon, &config)?;
    let elapsed = start.elapsed().as_secs_f64();

    let model_path = pick(&args.model, &s.paths().model);
    write(&model_path, outcome.model.to_bytes())?;
    let mut log_text = String::from("epoch\tloss\n");
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        log_text.push_str(&format!("{}\t{l:.12}\n", i + 1));
    }
    write(&loss_path(&model_path), log_text)?;
    write(&split_path(&model_path), serde_json::to_string_pretty(&split)? + "\n")?;

    println!(
        "trained on {} sentences from {} documents ({} held out) in {elapsed:.1}s",
        examples.len(),
        split.train.len(),
        split.test.len()
    );
    if let (Some(first), Some(last)) = (outcome.epoch_losses.first(), outcome.epoch_losses.last()) {
        println!(
            "  loss {first:.4} -> {last:.4} over {} epochs",
            outcome.epoch_losses.len()
        );
    }
    println!("  model: {}", model_path.display());
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize, Deserialize)]
struct RateError {
    document_id: String,
    error: String,
}

pub fn rate(s: &Settings, args: &RateArgs) -> Result<Outcome> {
    let lexicon = s.lexicon(args.lexicon.as_deref())?;
    let pre = s.preprocessor(&lexicon)?;
    let engine = s.engine()?;
    let model_path = pick(&args.model, &s.paths().model);
    let model;
    let tagger: &dyn Tagger = match args.tagger {
        TaggerKind::Dict => &pipescore_core::DictionaryTagger,
        TaggerKind::Bilstm => {
            model = TaggerModel::load(&model_path)
                .with_context(|| format!("cannot load model `{}`", model_path.display()))?;
            &model
        }
    };

    let input = pick(&args.input, &s.paths().corpus);
    let mut loaded = if input.is_dir() {
        load_documents(&input)?
    } else if input.is_file() {
        let id = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let doc = fs::read_to_string(&input)
            .map_err(|e| pipescore_core::Error::io(&input, e))
            .and_then(|raw| parse_document(&raw, &id));
        vec![(id, doc)]
    } else {
        bail!("input `{}` not found", input.display());
    };

    if args.subset != Subset::All {
        let path = args.split.clone().unwrap_or_else(|| split_path(&model_path));
        let split: CorpusSplit = serde_json::from_str(&read(&path, "split file")?)
            .with_context(|| format!("malformed split file `{}`", path.display()))?;
        let keep: BTreeSet<String> = match args.subset {
            Subset::Train => split.train.into_iter().collect(),
            _ => split.test.into_iter().collect(),
        };
        loaded.retain(|(id, _)| keep.contains(id));
    }

    let results: Vec<(String, Result<RatingReport, String>)> = loaded
        .into_par_iter()
        .map(|(id, doc)| {
            let report = doc
                .map(|d| pre.process(d))
                .and_then(|d| engine.rate_document(&d, &lexicon, tagger))
                .map_err(|e| e.to_string());
            (id, report)
        })
        .collect();

    let out = pick(&args.output, &s.paths().output);
    let reports_dir = out.join("reports");
    fs::create_dir_all(&reports_dir).with_context(|| format!("cannot create `{}`", reports_dir.display()))?;
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(report) => reports.push(report),
            Err(error) => errors.push(RateError { document_id: id, error }),
        }
    }
    for r in &reports {
        write(
            &reports_dir.join(format!("{}.json", r.document_id)),
            serde_json::to_string_pretty(r)? + "\n",
        )?;
    }
    write(&out.join("ratings.csv"), csv_summary(&reports))?;
    let records: Vec<GoldRecord> = reports.iter().map(RatingReport::to_record).collect();
    write(&out.join("predictions.tsv"), write_gold(&records))?;
    let errors_path = out.join("errors.json");
    if errors.is_empty() {
        if errors_path.exists() {
            fs::remove_file(&errors_path).with_context(|| format!("cannot remove `{}`", errors_path.display()))?;
        }
    } else {
        write(&errors_path, serde_json::to_string_pretty(&errors)? + "\n")?;
    }

    println!(
        "rated {} documents with the {} tagger into {}",
        reports.len(),
        tagger.name(),
        out.display()
    );
    for e in &errors {
        eprintln!("warning: {}: {}", e.document_id, e.error);
    }
    if !errors.is_empty() && reports.is_empty() {
        return Ok(Outcome::Partial(format!("all {} documents failed", errors.len())));
    }
    Ok(Outcome::Success)
}

pub fn evaluate(s: &Settings, args: &EvaluateArgs) -> Result<Outcome> {
    let out = pick(&args.output, &s.paths().output);
    let pred_path = args
        .pred
        .clone()
        .unwrap_or_else(|| s.paths().output.join("predictions.tsv"));
    let pred: Vec<GoldRecord> = first_per_document(&load_gold(&pred_path)?).into_values().collect();
    let gold: Vec<GoldRecord> = first_per_document(&load_gold(&pick(&args.gold, &s.paths().gold))?)
        .into_values()
        .collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|r| r.document_id.as_str()).collect();
    let missing: Vec<&str> = pred
        .iter()
        .map(|r| r.document_id.as_str())
        .filter(|id| !gold_ids.contains(id))
        .collect();
    if !missing.is_empty() {
        bail!("no gold record for: {}", missing.join(", "));
    }

    let lexicon = s.lexicon(args.lexicon.as_deref())?;
    let pre = s.preprocessor(&lexicon)?;
    let corpus_dir = pick(&args.corpus, &s.paths().corpus);
    let (docs, _) = load_corpus(&corpus_dir, &pre)?;
    let doc_ids: BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    let missing: Vec<&str> = pred
        .iter()
        .map(|r| r.document_id.as_str())
        .filter(|id| !doc_ids.contains(id))
        .collect();
    if !missing.is_empty() {
        bail!(
            "no document text in `{}` for: {}",
            corpus_dir.display(),
            missing.join(", ")
        );
    }

    let entities = evaluate_entities(&docs, &pred, &gold, args.spans)?;
    let ratings = evaluate_ratings(&pred, &gold)?;
    let entity_csv = metrics_csv(&entities.rows);
    let rating_csv = metrics_csv(&ratings.rows);
    write(&out.join("entity_metrics.csv"), &entity_csv)?;
    write(&out.join("rating_metrics.csv"), &rating_csv)?;
    let report = EvaluationReport::new(entities, ratings);
    write(
        &out.join("evaluation.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    let pct = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.1}%", v * 100.0));
    println!(
        "{} documents, token accuracy {}, rating accuracy {}",
        report.ratings.documents,
        pct(report.entities.token_accuracy),
        pct(report.ratings.accuracy)
    );
    print!("\nEntities\n{entity_csv}\nRatings\n{rating_csv}");
    Ok(Outcome::Success)
}
