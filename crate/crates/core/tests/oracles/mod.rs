//! Independent oracles shared by the property tests and the acceptance
//! runner. Nothing here calls the code under test to compute an expected
//! value.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pipescore_core::evaluation::{ConfusionCounts, MetricRow};
use pipescore_core::lexicon::{expand_synonyms, Blacklist, Relation, Seed, SynonymGraph};
use pipescore_core::{Category, Lexicon, Origin};

/// A small synonym graph over nodes `n00..`, with seeds and per-seed bans
/// given by node index.
#[derive(Debug, Clone)]
pub struct GraphCase {
    pub nodes: usize,
    pub synonyms: Vec<(usize, usize)>,
    pub antonyms: Vec<(usize, usize)>,
    pub seeds: Vec<usize>,
    pub banned: Vec<(usize, usize)>,
}

pub fn node(i: usize) -> String {
    format!("n{i:02}")
}

impl GraphCase {
    pub fn seeds(&self) -> Vec<Seed> {
        let set: BTreeSet<usize> = self.seeds.iter().copied().collect();
        set.into_iter()
            .map(|s| Seed::new(&node(s), Category::Location))
            .collect()
    }

    pub fn graph(&self) -> SynonymGraph {
        let mut g = SynonymGraph::new();
        for i in 0..self.nodes {
            g.add_node(&node(i));
        }
        for &(a, b) in &self.synonyms {
            if a != b {
                g.add_edge(&node(a), Relation::Synonym, &node(b)).unwrap();
            }
        }
        for &(a, b) in &self.antonyms {
            if a != b {
                g.add_edge(&node(a), Relation::Antonym, &node(b)).unwrap();
            }
        }
        g
    }

    fn is_banned(&self, seed: usize, term: usize) -> bool {
        seed != term && self.banned.contains(&(seed, term))
    }

    pub fn blacklist(&self) -> Blacklist {
        let mut b = Blacklist::default();
        for &(s, t) in &self.banned {
            if self.is_banned(s, t) {
                b.ban(&node(s), &node(t));
            }
        }
        b
    }

    pub fn build(&self, max_depth: u32) -> Lexicon {
        expand_synonyms(&self.seeds(), &self.graph(), &self.blacklist(), max_depth).unwrap()
    }

    /// Floyd-Warshall over synonym edges with the seed's banned nodes
    /// deleted. Row `seed` of the result.
    pub fn distances_from(&self, seed: usize) -> Vec<Option<u32>> {
        let n = self.nodes;
        let alive = |v: usize| !self.is_banned(seed, v);
        let mut d = vec![vec![None::<u32>; n]; n];
        for (v, row) in d.iter_mut().enumerate() {
            if alive(v) {
                row[v] = Some(0);
            }
        }
        for &(a, b) in &self.synonyms {
            if a != b && alive(a) && alive(b) {
                d[a][b] = Some(1);
                d[b][a] = Some(1);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                        if d[i][j].is_none_or(|c| x + y < c) {
                            d[i][j] = Some(x + y);
                        }
                    }
                }
            }
        }
        d.swap_remove(seed)
    }

    /// Expected `term -> (depth, seed_root)`: the minimum over seeds of
    /// (hop distance, seed-before-synonym, root name).
    pub fn expected(&self, max_depth: u32) -> BTreeMap<String, (u32, String)> {
        let mut best: BTreeMap<usize, (u32, u8, String)> = BTreeMap::new();
        let mut offer = |term: usize, cand: (u32, u8, String)| {
            let slot = best.entry(term).or_insert_with(|| cand.clone());
            if cand < *slot {
                *slot = cand;
            }
        };
        for s in self.seeds.iter().copied().collect::<BTreeSet<_>>() {
            offer(s, (0, 0, node(s)));
            for (t, d) in self.distances_from(s).into_iter().enumerate() {
                if let Some(d) = d {
                    if d >= 1 && d <= max_depth {
                        offer(t, (d, 2, node(s)));
                    }
                }
            }
        }
        best.into_iter().map(|(t, (d, _, r))| (node(t), (d, r))).collect()
    }
}

fn depth_of(origin: Origin) -> u32 {
    match origin {
        Origin::Seed | Origin::Morphological => 0,
        Origin::SynonymDepth(k) => k,
    }
}

/// Depth monotonicity, blacklist soundness and depth minimality for one
/// graph, for every depth up to `max_depth`.
pub fn check_graph_case(case: &GraphCase, max_depth: u32) -> Result<(), String> {
    let mut previous: Option<BTreeSet<String>> = None;
    for depth in 0..=max_depth {
        let lexicon = case.build(depth);
        let terms: BTreeSet<String> = lexicon.terms().into_iter().map(str::to_string).collect();
        if let Some(prev) = &previous {
            if !prev.is_subset(&terms) {
                return Err(format!(
                    "depth {depth}: lost terms {:?}",
                    prev.difference(&terms).collect::<Vec<_>>()
                ));
            }
        }
        for e in lexicon.entries() {
            let (s, t) = (parse_node(&e.seed_root), parse_node(&e.term));
            if case.is_banned(s, t) {
                return Err(format!(
                    "depth {depth}: `{}` banned for `{}` but present",
                    e.term, e.seed_root
                ));
            }
        }
        let got: BTreeMap<String, (u32, String)> = lexicon
            .entries()
            .map(|e| (e.term.clone(), (depth_of(e.origin), e.seed_root.clone())))
            .collect();
        let want = case.expected(depth);
        if got != want {
            return Err(format!(
                "depth {depth}: lexicon {got:?} != shortest-path oracle {want:?}"
            ));
        }
        previous = Some(terms);
    }
    Ok(())
}

fn parse_node(term: &str) -> usize {
    term[1..].parse().expect("node name")
}

/// Lookup matches are ordered, non-overlapping, correspond to entries, are
/// not extendable, and leave no uncovered position where an entry starts.
pub fn check_lookup(lexicon: &Lexicon, tokens: &[String]) -> Result<(), String> {
    let max_words = lexicon.terms().iter().map(|t| t.split(' ').count()).max().unwrap_or(0);
    let entry_at =
        |i: usize, len: usize| i + len <= tokens.len() && lexicon.get(&tokens[i..i + len].join(" ")).is_some();
    let matches = lexicon.lookup(tokens);
    let mut covered = vec![false; tokens.len()];
    let mut last_end = 0;
    for m in &matches {
        let (s, e) = (m.tokens.start, m.tokens.end);
        if s < last_end || e <= s || e > tokens.len() {
            return Err(format!("bad or overlapping match {s}..{e}"));
        }
        if tokens[s..e].join(" ") != m.entry.term {
            return Err(format!("match {s}..{e} does not spell `{}`", m.entry.term));
        }
        if (e - s + 1..=max_words).any(|len| entry_at(s, len)) {
            return Err(format!("match {s}..{e} is extendable"));
        }
        covered[s..e].iter_mut().for_each(|c| *c = true);
        last_end = e;
    }
    for (i, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
        if (1..=max_words).any(|len| entry_at(i, len)) {
            return Err(format!("entry starting at uncovered token {i} was missed"));
        }
    }
    Ok(())
}

/// Exact fraction; `None` for 0/0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: u64,
    pub den: u64,
}

fn frac(num: u64, den: u64) -> Option<Frac> {
    (den > 0).then_some(Frac { num, den })
}

/// Per-position loop, written without reference to the library counts.
pub fn brute_counts<L: PartialEq>(pred: &[L], gold: &[L], target: &L) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for i in 0..pred.len() {
        let p = pred[i] == *target;
        let g = gold[i] == *target;
        if p && g {
            c.tp += 1;
        } else if p {
            c.fp += 1;
        } else if g {
            c.fn_ += 1;
        } else {
            c.tn += 1;
        }
    }
    c
}

/// Expected `(accuracy, recall, specificity, precision, f1)` as fractions.
pub fn brute_metrics(c: ConfusionCounts) -> [Option<Frac>; 5] {
    let f1 = if c.tp > 0 {
        frac(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
    } else {
        None
    };
    [
        frac(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_),
        frac(c.tp, c.tp + c.fn_),
        frac(c.tn, c.tn + c.fp),
        frac(c.tp, c.tp + c.fp),
        f1,
    ]
}

/// Compares a metric row with the fraction oracle within `tol`.
pub fn check_metric_row(row: &MetricRow, c: ConfusionCounts, tol: f64) -> Result<(), String> {
    if row.counts != c {
        return Err(format!("counts {:?} != oracle {c:?}", row.counts));
    }
    let got = [row.accuracy, row.recall, row.specificity, row.precision, row.f1];
    let names = ["accuracy", "recall", "specificity", "precision", "f1"];
    for ((g, w), name) in got.into_iter().zip(brute_metrics(c)).zip(names) {
        match (g, w) {
            (None, None) => {}
            (Some(g), Some(w)) if (g - w.num as f64 / w.den as f64).abs() <= tol => {}
            _ => return Err(format!("{name}: {g:?} vs oracle {w:?} for {c:?}")),
        }
    }
    Ok(())
}

/// Kappa from the full contingency table: p_o from the diagonal, p_e from
/// row and column totals.
pub fn brute_kappa<L: Ord + Clone>(a: &[L], b: &[L]) -> Option<f64> {
    let labels: Vec<L> = a
        .iter()
        .chain(b)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = labels.len();
    let n = a.len();
    if n == 0 {
        return None;
    }
    let idx = |x: &L| labels.iter().position(|l| l == x).unwrap();
    let mut table = vec![vec![0u64; k]; k];
    for (x, y) in a.iter().zip(b) {
        table[idx(x)][idx(y)] += 1;
    }
    let nf = n as f64;
    let p_o = (0..k).map(|i| table[i][i]).sum::<u64>() as f64 / nf;
    let p_e = (0..k)
        .map(|i| {
            let row: u64 = table[i].iter().sum();
            let col: u64 = table.iter().map(|r| r[i]).sum();
            (row as f64 / nf) * (col as f64 / nf)
        })
        .sum::<f64>();
    if (1.0 - p_e).abs() < 1e-15 {
        return None;
    }
    Some((p_o - p_e) / (1.0 - p_e))
}

/// Rating rows transcribed by hand: (w_frequencies, w_location options,
/// w_defect options, rating).
pub const RATING_TABLE: [(f64, [f64; 2], &[f64], u8); 5] = [
    (0.1, [0.9, 1.0], &[0.5], 1),
    (0.25, [0.9, 1.0], &[0.8, 1.0], 2),
    (0.5, [0.9, 1.0], &[0.8, 1.0], 3),
    (0.75, [0.9, 1.0], &[0.8, 1.0], 4),
    (0.99, [0.9, 1.0], &[0.8, 1.0], 5),
];

pub const FREQUENCY_WEIGHTS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.99];
pub const LOCATION_WEIGHTS: [f64; 2] = [0.9, 1.0];
pub const DEFECT_WEIGHTS: [f64; 3] = [0.5, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingOracle {
    /// Listed in the table.
    Listed(u8),
    /// No defect found: rating 1 at any frequency.
    NoDefect,
    /// Defect found at the lowest frequency: not in the table.
    Gap,
}

pub fn rating_oracle(f: f64, l: f64, d: f64) -> RatingOracle {
    for (tf, locs, defects, r) in RATING_TABLE {
        if tf == f && locs.contains(&l) && defects.contains(&d) {
            return RatingOracle::Listed(r);
        }
    }
    if d == 0.5 {
        RatingOracle::NoDefect
    } else {
        RatingOracle::Gap
    }
}

pub mod bilstm {
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use pipescore_core::tagger::{ModelDims, TaggerModel, TrainingExample, Vocabulary};
    use pipescore_core::Tag;

    fn random_dims<R: Rng>(rng: &mut R) -> ModelDims {
        ModelDims {
            word: rng.gen_range(1..=6),
            dict: rng.gen_range(1..=4),
            hidden: rng.gen_range(1..=10),
        }
    }

    fn random_inputs<R: Rng>(rng: &mut R, dim: usize, len: usize) -> Vec<Array1<f64>> {
        (0..len)
            .map(|_| Array1::from_iter((0..dim).map(|_| rng.gen_range(-1.0..=1.0))))
            .collect()
    }

    /// On `cases` random sequences: a zero-parameter model gives exactly
    /// zero states, and a random model keeps the length and stays strictly
    /// inside (-1, 1).
    pub fn check_contract(cases: usize, seed: u64) -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for case in 0..cases {
            let dims = random_dims(&mut rng);
            let len = rng.gen_range(1..=30);
            let inputs = random_inputs(&mut rng, dims.input(), len);
            let vocab = Vocabulary::new(Vec::new());

            let zero = TaggerModel::zeros(vocab.clone(), dims);
            let states = zero.bilstm_forward(&inputs).map_err(|e| e.to_string())?;
            if states.len() != len
                || states
                    .iter()
                    .any(|h| h.len() != 2 * dims.hidden || h.iter().any(|&v| v != 0.0))
            {
                return Err(format!("case {case}: zero model gave a non-zero state"));
            }

            let range = rng.gen_range(0.01..=0.5);
            let model = TaggerModel::init(vocab, dims, range, rng.gen());
            let states = model.bilstm_forward(&inputs).map_err(|e| e.to_string())?;
            if states.len() != len {
                return Err(format!("case {case}: {} states for {len} inputs", states.len()));
            }
            for h in &states {
                if h.len() != 2 * dims.hidden || !h.iter().all(|v| v.abs() < 1.0) {
                    return Err(format!("case {case}: state out of bounds {h}"));
                }
            }
        }
        Ok(())
    }

    pub fn gradient_examples() -> Vec<TrainingExample> {
        let ex = |words: &[&str], cats: &[usize], tags: &[Tag]| TrainingExample {
            words: words.iter().map(|w| w.to_string()).collect(),
            categories: cats.to_vec(),
            tags: tags.to_vec(),
        };
        vec![
            ex(
                &["frequently", "leaks", "at", "the", "joint", "."],
                &[3, 1, 0, 0, 2, 0],
                &[Tag::Frequency, Tag::Defect, Tag::O, Tag::O, Tag::Location, Tag::O],
            ),
            ex(
                &["no", "cracks", "upstream"],
                &[0, 1, 2],
                &[Tag::O, Tag::Defect, Tag::Location],
            ),
        ]
    }

    pub fn gradient_vocab() -> Vocabulary {
        Vocabulary::new(
            [
                "frequently",
                "leaks",
                "at",
                "the",
                "joint",
                ".",
                "no",
                "cracks",
                "upstream",
            ]
            .map(String::from),
        )
    }

    /// `count` random coordinates spread over the gate, output and embedding
    /// tensors of `model`, restricted to words that occur in the examples.
    pub fn random_picks(model: &TaggerModel, count: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
        let used_rows = model.vocab.len().min(10);
        (0..count)
            .map(|i| {
                let tensor = [2, 4, 6, 3, 5, 7, 1, 0][i % 8];
                let limit = if tensor == 0 {
                    used_rows * model.dims.word
                } else {
                    sizes[tensor]
                };
                (tensor, rng.gen_range(0..limit))
            })
            .collect()
    }
}
