//! Classification metrics, annotator agreement and evaluation reports.
//!
//! Multi-class results are reduced one-vs-rest to [`ConfusionCounts`]:
//!
//! ```text
//! accuracy    = (tp + tn) / (tp + tn + fp + fn)
//! recall      = tp / (tp + fn)
//! specificity = tn / (tn + fp)
//! precision   = tp / (tp + fp)
//! f1          = 2 · recall · precision / (recall + precision)
//! ```
//!
//! A ratio with a zero denominator is undefined (`None`), never zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityType, GoldRecord, Span};
use crate::error::{Error, Result};

/// Report footer on the precision and specificity formulas.
pub const FORMULA_NOTE: &str =
    "precision = tp / (tp + fp) and specificity = tn / (tn + fp) (standard definitions; other numerator and denominator forms are not used)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// One-vs-rest counts of `target` over aligned label sequences.
pub fn confusion_counts<L: PartialEq>(pred: &[L], gold: &[L], target: &L) -> Result<ConfusionCounts> {
    if pred.len() != gold.len() {
        return Err(Error::AlignmentError {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (p, g) in pred.iter().zip(gold) {
        match (p == target, g == target) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub counts: ConfusionCounts,
    /// Rows beyond the standard report set.
    #[serde(default)]
    pub extension: bool,
}

pub fn metrics(label: &str, c: ConfusionCounts) -> MetricRow {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (recall, precision) {
        (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * r * p / (r + p)),
        _ => None,
    };
    MetricRow {
        label: label.to_string(),
        accuracy: ratio(c.tp + c.tn, c.total()),
        recall,
        specificity: ratio(c.tn, c.tn + c.fp),
        precision,
        f1,
        counts: c,
        extension: false,
    }
}

/// Unweighted mean of each column over the rows where it is defined.
pub fn macro_average(label: &str, rows: &[MetricRow]) -> MetricRow {
    let mean = |get: fn(&MetricRow) -> Option<f64>| {
        let vals: Vec<f64> = rows.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    MetricRow {
        label: label.to_string(),
        accuracy: mean(|r| r.accuracy),
        recall: mean(|r| r.recall),
        specificity: mean(|r| r.specificity),
        precision: mean(|r| r.precision),
        f1: mean(|r| r.f1),
        counts: rows.iter().fold(ConfusionCounts::default(), |a, r| a + r.counts),
        extension: false,
    }
}

/// Cohen's kappa `(p_o - p_e) / (1 - p_e)`; `None` when chance agreement is
/// total or the lists are empty.
pub fn cohens_kappa<L: Ord>(a: &[L], b: &[L]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::AlignmentError {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as u128;
    if n == 0 {
        return Ok(None);
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut marg: BTreeMap<&L, (u128, u128)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    // Scaled by n²: p_o·n² = agree·n, p_e·n² = Σ marginal products.
    let chance: u128 = marg.values().map(|(x, y)| x * y).sum();
    let den = n * n - chance;
    if den == 0 {
        return Ok(None);
    }
    Ok(Some((agree as f64 * n as f64 - chance as f64) / den as f64))
}

/// Kappa after reducing both lists to "is `target`" / "is not".
pub fn binarized_kappa<L: PartialEq>(a: &[L], b: &[L], target: &L) -> Result<Option<f64>> {
    let x: Vec<bool> = a.iter().map(|v| v == target).collect();
    let y: Vec<bool> = b.iter().map(|v| v == target).collect();
    cohens_kappa(&x, &y)
}

fn entity_label(t: EntityType) -> &'static str {
    match t {
        EntityType::Defect => "Defects",
        EntityType::LocationOfDefect => "Location of defect",
        EntityType::FrequencyOfDefects => "Frequency of defects",
        EntityType::SizeOfDefect => "Size of defect",
    }
}

/// Rows in report order; size is the extension row.
const ENTITY_ROWS: [EntityType; 4] = [
    EntityType::Defect,
    EntityType::LocationOfDefect,
    EntityType::FrequencyOfDefects,
    EntityType::SizeOfDefect,
];

/// Entity type per token of a preprocessed document: the first entity whose
/// raw span overlaps the token's raw span, or `None`.
pub fn token_labels(doc: &Document, record: &GoldRecord) -> Vec<Option<EntityType>> {
    doc.sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .map(|tok| {
            record
                .entities
                .iter()
                .find(|e| e.span.overlaps(&tok.raw_span))
                .map(|e| e.entity_type)
        })
        .collect()
}

/// Strict span matching counts for one entity type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRow {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityEvaluation {
    pub documents: usize,
    pub tokens: usize,
    /// Fraction of tokens whose predicted type equals the gold type,
    /// including tokens outside any entity.
    pub token_accuracy: Option<f64>,
    pub rows: Vec<MetricRow>,
    pub span_rows: Option<Vec<SpanRow>>,
}

fn index_gold(gold: &[GoldRecord]) -> BTreeMap<&str, &GoldRecord> {
    let mut map = BTreeMap::new();
    for g in gold {
        map.entry(g.document_id.as_str()).or_insert(g);
    }
    map
}

/// Token-level entity evaluation of predicted records against gold records
/// over preprocessed documents. Every prediction needs a gold record and a
/// document.
pub fn evaluate_entities(
    docs: &[Document],
    pred: &[GoldRecord],
    gold: &[GoldRecord],
    span_mode: bool,
) -> Result<EntityEvaluation> {
    let gold = index_gold(gold);
    let docs: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut p_labels = Vec::new();
    let mut g_labels = Vec::new();
    let mut span_counts: BTreeMap<EntityType, (u64, u64, u64)> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for p in pred {
        if !seen.insert(p.document_id.as_str()) {
            continue;
        }
        let g = gold
            .get(p.document_id.as_str())
            .ok_or_else(|| Error::MissingGold(p.document_id.clone()))?;
        let doc = docs
            .get(p.document_id.as_str())
            .ok_or_else(|| Error::MissingGold(format!("document text for {}", p.document_id)))?;
        p_labels.extend(token_labels(doc, p));
        g_labels.extend(token_labels(doc, g));
        if span_mode {
            let key = |r: &GoldRecord| -> BTreeSet<(EntityType, Span)> {
                r.entities.iter().map(|e| (e.entity_type, e.span)).collect()
            };
            let (ps, gs) = (key(p), key(g));
            for t in ENTITY_ROWS {
                let c = span_counts.entry(t).or_default();
                c.0 += ps.iter().filter(|e| e.0 == t && gs.contains(e)).count() as u64;
                c.1 += ps.iter().filter(|e| e.0 == t && !gs.contains(e)).count() as u64;
                c.2 += gs.iter().filter(|e| e.0 == t && !ps.contains(e)).count() as u64;
            }
        }
    }
    let rows = ENTITY_ROWS
        .iter()
        .map(|&t| {
            let c = confusion_counts(&p_labels, &g_labels, &Some(t))?;
            let mut row = metrics(entity_label(t), c);
            row.extension = t == EntityType::SizeOfDefect;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let agree = p_labels.iter().zip(&g_labels).filter(|(a, b)| a == b).count() as u64;
    let span_rows = span_mode.then(|| {
        ENTITY_ROWS
            .iter()
            .map(|t| {
                let (tp, fp, fn_) = span_counts.get(t).copied().unwrap_or_default();
                let m = metrics("", ConfusionCounts { tp, fp, fn_, tn: 0 });
                SpanRow {
                    label: entity_label(*t).to_string(),
                    tp,
                    fp,
                    fn_,
                    precision: m.precision,
                    recall: m.recall,
                    f1: m.f1,
                }
            })
            .collect()
    });
    Ok(EntityEvaluation {
        documents: seen.len(),
        tokens: p_labels.len(),
        token_accuracy: ratio(agree, p_labels.len() as u64),
        rows,
        span_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEvaluation {
    pub documents: usize,
    pub accuracy: Option<f64>,
    pub rows: Vec<MetricRow>,
}

/// One-vs-rest rows for ratings 1 to 5 plus overall accuracy.
pub fn evaluate_rating_labels(pred: &[u8], gold: &[u8]) -> Result<RatingEvaluation> {
    let rows = (1..=5u8)
        .map(|r| {
            Ok(metrics(
                &format!("Defect rating {r}"),
                confusion_counts(pred, gold, &r)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let agree = pred.iter().zip(gold).filter(|(a, b)| a == b).count() as u64;
    Ok(RatingEvaluation {
        documents: pred.len(),
        accuracy: ratio(agree, pred.len() as u64),
        rows,
    })
}

pub fn evaluate_ratings(pred: &[GoldRecord], gold: &[GoldRecord]) -> Result<RatingEvaluation> {
    let gold = index_gold(gold);
    let mut seen = BTreeSet::new();
    let mut p = Vec::new();
    let mut g = Vec::new();
    for r in pred {
        if !seen.insert(r.document_id.as_str()) {
            continue;
        }
        let gr = gold
            .get(r.document_id.as_str())
            .ok_or_else(|| Error::MissingGold(r.document_id.clone()))?;
        p.push(r.rating);
        g.push(gr.rating);
    }
    evaluate_rating_labels(&p, &g)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{:.1}", v * 100.0))
}

/// CSV table in percent with one decimal; undefined cells read `undefined`.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("label,accuracy,recall,specificity,precision,f1\n");
    for r in rows {
        let label = if r.extension {
            format!("{} (extension)", r.label)
        } else {
            r.label.clone()
        };
        out.push_str(&format!(
            "{label},{},{},{},{},{}\n",
            pct(r.accuracy),
            pct(r.recall),
            pct(r.specificity),
            pct(r.precision),
            pct(r.f1)
        ));
    }
    out.push_str(&format!("# {FORMULA_NOTE}\n"));
    out
}

/// Combined entity and rating results, serialized with raw fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub entities: EntityEvaluation,
    pub ratings: RatingEvaluation,
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn new(entities: EntityEvaluation, ratings: RatingEvaluation) -> Self {
        EvaluationReport {
            entities,
            ratings,
            notes: vec![
                FORMULA_NOTE.to_string(),
                "entity rows are token-level one-vs-rest; the size row is an extension".to_string(),
            ],
        }
    }
}
