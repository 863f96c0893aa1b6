//! Defect / location / frequency lexicon built from seed terms.
//!
//! Each seed is expanded twice: by suffix rules (`leak` -> `leaks`, `leaking`,
//! `leaked`, `leakage`) and by breadth-first search over a synonym graph. The
//! search never enters a term blacklisted for the seed it started from and
//! does not follow antonym edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::resources::content_lines;

pub const DEFAULT_MAX_DEPTH: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Defect,
    Location,
    Frequency,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Defect, Category::Location, Category::Frequency];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Defect => "defect",
            Category::Location => "location",
            Category::Frequency => "frequency",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Seed,
    Morphological,
    /// Minimal number of synonym hops from the seed, at least 1.
    SynonymDepth(u32),
}

impl Origin {
    fn depth(&self) -> u32 {
        match self {
            Origin::Seed | Origin::Morphological => 0,
            Origin::SynonymDepth(k) => *k,
        }
    }

    fn order(&self) -> u8 {
        match self {
            Origin::Seed => 0,
            Origin::Morphological => 1,
            Origin::SynonymDepth(_) => 2,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Seed => f.write_str("seed"),
            Origin::Morphological => f.write_str("morph"),
            Origin::SynonymDepth(k) => write!(f, "syn:{k}"),
        }
    }
}

impl FromStr for Origin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "seed" => Ok(Origin::Seed),
            "morph" => Ok(Origin::Morphological),
            _ => match s.strip_prefix("syn:").map(str::parse::<u32>) {
                Some(Ok(k)) if k >= 1 => Ok(Origin::SynonymDepth(k)),
                _ => Err(()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LexiconEntry {
    /// Lowercase, words separated by single spaces.
    pub term: String,
    pub category: Category,
    pub origin: Origin,
    pub seed_root: String,
}

impl LexiconEntry {
    /// Collision rank: smaller depth, then seeds before variants, then the
    /// lexicographically smaller seed root.
    fn rank(&self) -> (u32, u8, &str) {
        (self.origin.depth(), self.origin.order(), &self.seed_root)
    }
}

/// Lowercases and collapses whitespace so terms line up with token sequences.
pub fn normalize_term(term: &str) -> String {
    crate::preprocess::normalize_text(term)
        .to_lowercase()
        .trim_end_matches(['.', '!', '?'])
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub term: String,
    pub category: Category,
}

impl Seed {
    pub fn new(term: &str, category: Category) -> Self {
        Seed {
            term: normalize_term(term),
            category,
        }
    }
}

/// Reads `term <TAB> category` lines.
pub fn parse_seeds(text: &str) -> Result<Vec<Seed>> {
    content_lines(text)
        .map(|(line, content)| {
            let bad = |reason: String| Error::ResourceFormat {
                file: "seeds".into(),
                line,
                reason,
            };
            let (term, category) = content
                .split_once('\t')
                .ok_or_else(|| bad("expected `term<TAB>category`".into()))?;
            let category = category
                .trim()
                .parse::<Category>()
                .map_err(|_| bad(format!("unknown category `{}`", category.trim())))?;
            let seed = Seed::new(term, category);
            if seed.term.is_empty() {
                return Err(bad("empty term".into()));
            }
            Ok(seed)
        })
        .collect()
}

/// Words that take the `-age` noun suffix.
const AGE_SUFFIX: [&str; 6] = ["leak", "break", "block", "seep", "shrink", "spill"];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Three-letter consonant-vowel-consonant words double the final consonant
/// before `-ing` / `-ed` (`sag` -> `sagging`).
fn doubles_final(word: &str) -> bool {
    let b = word.as_bytes();
    b.len() == 3 && !is_vowel(b[0]) && is_vowel(b[1]) && !is_vowel(b[2]) && !matches!(b[2], b'w' | b'x' | b'y')
}

/// The seed and its suffix-rule variants, deduplicated, seed first.
///
/// Multiword seeds are returned unchanged.
pub fn expand_morphology(seed: &str) -> Vec<String> {
    let word = seed.trim();
    let mut out = vec![word.to_string()];
    if word.is_empty() || word.contains(' ') || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return out;
    }
    let bytes = word.as_bytes();
    let last = bytes[bytes.len() - 1];
    let consonant_y = last == b'y' && bytes.len() > 1 && !is_vowel(bytes[bytes.len() - 2]);

    let plural = if word.ends_with('s')
        || word.ends_with('x')
        || word.ends_with('z')
        || word.ends_with("ch")
        || word.ends_with("sh")
    {
        format!("{word}es")
    } else if consonant_y {
        format!("{}ies", &word[..word.len() - 1])
    } else {
        format!("{word}s")
    };
    out.push(plural);

    let verbal = !["ing", "ed", "ion", "ness"].iter().any(|s| word.ends_with(s));
    if verbal {
        let stem_ing = if last == b'e' && !word.ends_with("ee") {
            word[..word.len() - 1].to_string()
        } else if doubles_final(word) {
            format!("{word}{}", last as char)
        } else {
            word.to_string()
        };
        out.push(format!("{stem_ing}ing"));

        let past = if last == b'e' {
            format!("{word}d")
        } else if consonant_y {
            format!("{}ied", &word[..word.len() - 1])
        } else if doubles_final(word) {
            format!("{word}{}ed", last as char)
        } else {
            format!("{word}ed")
        };
        out.push(past);
    }

    if AGE_SUFFIX.contains(&word) {
        out.push(format!("{word}age"));
    }

    let mut seen = BTreeSet::new();
    out.retain(|v| seen.insert(v.clone()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Synonym,
    Antonym,
}

/// Undirected term graph with synonym and antonym edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymGraph {
    nodes: BTreeSet<String>,
    synonyms: BTreeMap<String, BTreeSet<String>>,
    antonyms: BTreeMap<String, BTreeSet<String>>,
}

impl SynonymGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `term <TAB> syn|ant <TAB> term` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut graph = SynonymGraph::new();
        for (line, content) in content_lines(text) {
            let bad = |reason: String| Error::ResourceFormat {
                file: "synonym graph".into(),
                line,
                reason,
            };
            let fields: Vec<&str> = content.split('\t').collect();
            let [a, rel, b] = fields[..] else {
                return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let relation = match rel.trim() {
                "syn" => Relation::Synonym,
                "ant" => Relation::Antonym,
                other => return Err(bad(format!("unknown relation `{other}`"))),
            };
            graph
                .add_edge(&normalize_term(a), relation, &normalize_term(b))
                .map_err(bad)?;
        }
        Ok(graph)
    }

    pub fn add_node(&mut self, term: &str) {
        self.nodes.insert(term.to_string());
    }

    pub fn add_edge(&mut self, a: &str, relation: Relation, b: &str) -> Result<(), String> {
        if a.is_empty() || b.is_empty() {
            return Err("empty term".into());
        }
        if a == b {
            return Err(format!("self edge on `{a}`"));
        }
        self.add_node(a);
        self.add_node(b);
        let adjacency = match relation {
            Relation::Synonym => &mut self.synonyms,
            Relation::Antonym => &mut self.antonyms,
        };
        adjacency.entry(a.to_string()).or_default().insert(b.to_string());
        adjacency.entry(b.to_string()).or_default().insert(a.to_string());
        Ok(())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.nodes.contains(term)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn neighbors(&self, term: &str, relation: Relation) -> impl Iterator<Item = &str> {
        let adjacency = match relation {
            Relation::Synonym => &self.synonyms,
            Relation::Antonym => &self.antonyms,
        };
        adjacency
            .get(term)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }
}

/// Terms excluded from the expansion of specific seeds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blacklist {
    per_seed: BTreeMap<String, BTreeSet<String>>,
}

impl Blacklist {
    /// Reads `seed <TAB> banned_term` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut list = Blacklist::default();
        for (line, content) in content_lines(text) {
            let (seed, banned) = content.split_once('\t').ok_or_else(|| Error::ResourceFormat {
                file: "blacklist".into(),
                line,
                reason: "expected `seed<TAB>banned_term`".into(),
            })?;
            list.ban(&normalize_term(seed), &normalize_term(banned));
        }
        Ok(list)
    }

    pub fn ban(&mut self, seed: &str, term: &str) {
        self.per_seed
            .entry(seed.to_string())
            .or_default()
            .insert(term.to_string());
    }

    pub fn is_banned(&self, seed: &str, term: &str) -> bool {
        self.per_seed.get(seed).is_some_and(|s| s.contains(term))
    }
}

/// A lexicon match over a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexiconMatch<'a> {
    /// Half-open token range.
    pub tokens: Span,
    pub entry: &'a LexiconEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
    max_words: usize,
}

impl Lexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(term)
    }

    /// Entries in term order.
    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn terms(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn count(&self, category: Category) -> usize {
        self.entries().filter(|e| e.category == category).count()
    }

    fn offer(&mut self, entry: LexiconEntry) {
        match self.entries.get(&entry.term) {
            Some(existing) if existing.rank() <= entry.rank() => {}
            _ => {
                self.max_words = self.max_words.max(entry.term.split(' ').count());
                self.entries.insert(entry.term.clone(), entry);
            }
        }
    }

    /// Left-to-right longest match of single- and multiword terms.
    pub fn lookup<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<LexiconMatch<'_>> {
        let mut matches = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = (1..=self.max_words.min(tokens.len() - i)).rev().find_map(|len| {
                let key = tokens[i..i + len]
                    .iter()
                    .map(AsRef::as_ref)
                    .collect::<Vec<_>>()
                    .join(" ");
                self.entries.get(&key).map(|e| (len, e))
            });
            match longest {
                Some((len, entry)) => {
                    matches.push(LexiconMatch {
                        tokens: Span::new(i, i + len),
                        entry,
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        matches
    }

    /// `term <TAB> category <TAB> origin <TAB> seed_root` lines sorted by term.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.term, e.category, e.origin, e.seed_root));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        for (line, content) in content_lines(text) {
            let bad = |reason: String| Error::LexiconFormat { line, reason };
            let fields: Vec<&str> = content.split('\t').collect();
            let [term, category, origin, seed_root] = fields[..] else {
                return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
            };
            if term.is_empty() || term != normalize_term(term) {
                return Err(bad(format!("term `{term}` is not normalized")));
            }
            let entry = LexiconEntry {
                term: term.to_string(),
                category: category
                    .parse()
                    .map_err(|_| bad(format!("unknown category `{category}`")))?,
                origin: origin.parse().map_err(|_| bad(format!("unknown origin `{origin}`")))?,
                seed_root: seed_root.to_string(),
            };
            if lexicon.entries.contains_key(term) {
                return Err(bad(format!("duplicate term `{term}`")));
            }
            lexicon.max_words = lexicon.max_words.max(term.split(' ').count());
            lexicon.entries.insert(term.to_string(), entry);
        }
        for e in lexicon.entries() {
            let root_is_seed = lexicon.get(&e.seed_root).is_some_and(|r| r.origin == Origin::Seed);
            if !root_is_seed {
                return Err(Error::LexiconFormat {
                    line: 0,
                    reason: format!("seed root `{}` of `{}` is not a seed entry", e.seed_root, e.term),
                });
            }
        }
        Ok(lexicon)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Side information gathered during expansion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpansionReport {
    /// Antonyms met while expanding each seed; never added to the lexicon.
    pub antonyms: BTreeMap<String, BTreeSet<String>>,
    /// Seeds absent from the graph; they enter the lexicon unexpanded.
    pub missing_seeds: Vec<String>,
}

/// See [`expand_synonyms_with_report`].
pub fn expand_synonyms(seeds: &[Seed], graph: &SynonymGraph, blacklist: &Blacklist, max_depth: u32) -> Result<Lexicon> {
    expand_synonyms_with_report(seeds, graph, blacklist, max_depth).map(|(l, _)| l)
}

/// Builds the lexicon: seeds, morphological variants of defect seeds, and
/// breadth-first synonym expansion up to `max_depth` hops per seed.
pub fn expand_synonyms_with_report(
    seeds: &[Seed],
    graph: &SynonymGraph,
    blacklist: &Blacklist,
    max_depth: u32,
) -> Result<(Lexicon, ExpansionReport)> {
    if seeds.is_empty() {
        return Err(Error::LexiconRequired);
    }
    let mut lexicon = Lexicon::default();
    let mut report = ExpansionReport::default();

    for seed in seeds {
        let root = seed.term.as_str();
        let entry = |term: &str, origin| LexiconEntry {
            term: term.to_string(),
            category: seed.category,
            origin,
            seed_root: root.to_string(),
        };
        lexicon.offer(entry(root, Origin::Seed));
        if seed.category == Category::Defect {
            for variant in expand_morphology(root).iter().skip(1) {
                if !blacklist.is_banned(root, variant) {
                    lexicon.offer(entry(variant, Origin::Morphological));
                }
            }
        }

        if !graph.contains(root) {
            log::info!("seed `{root}` is not in the synonym graph");
            report.missing_seeds.push(root.to_string());
            continue;
        }

        let mut depth: BTreeMap<&str, u32> = BTreeMap::from([(root, 0)]);
        let mut queue = VecDeque::from([root]);
        while let Some(term) = queue.pop_front() {
            let d = depth[term];
            for antonym in graph.neighbors(term, Relation::Antonym) {
                if !blacklist.is_banned(root, antonym) {
                    log::info!("seed `{root}`: antonym `{antonym}` of `{term}` not expanded");
                    report
                        .antonyms
                        .entry(root.to_string())
                        .or_default()
                        .insert(antonym.to_string());
                }
            }
            if d == max_depth {
                continue;
            }
            for next in graph.neighbors(term, Relation::Synonym) {
                if depth.contains_key(next) || blacklist.is_banned(root, next) {
                    continue;
                }
                depth.insert(next, d + 1);
                lexicon.offer(entry(next, Origin::SynonymDepth(d + 1)));
                queue.push_back(next);
            }
        }
    }
    Ok((lexicon, report))
}
