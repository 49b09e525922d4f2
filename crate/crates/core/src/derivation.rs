//! Decomposes curated influence graphs into generation samples.
//!
//! Every simple path of at most `max_hop` edges yields one forward sample
//! whose relation sign is the parity of the path's negative edges, and
//! optionally the inverse sample read from the path's far end.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, Hop, InfluenceGraph, NodeId, RelationKind, ValidationReport};
use crate::jsonl::{self, JsonlError};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const CONFIG_FILE: &str = "derivation.json";
pub const STATS_FILE: &str = "stats.txt";

#[derive(Debug, Error)]
pub enum DerivationError {
    #[error("graph `{passage_id}` failed validation: {report}")]
    InvalidGraph {
        passage_id: String,
        report: ValidationReport,
    },
    #[error("graph is for passage `{graph}` but passage `{passage}` was supplied")]
    PassageMismatch { graph: String, passage: String },
    #[error("passage `{0}` has no non-empty sentences")]
    InvalidPassage(String),
    #[error("no passage found for graph `{0}`")]
    MissingPassage(String),
    #[error("no split assigned to passage `{0}`")]
    MissingSplit(String),
    #[error("passage `{passage_id}`: {source}")]
    InPassage {
        passage_id: String,
        #[source]
        source: Box<DerivationError>,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub sentences: Vec<String>,
}

impl Passage {
    pub fn new(
        passage_id: impl Into<String>,
        sentences: Vec<String>,
    ) -> Result<Self, DerivationError> {
        let p = Passage {
            passage_id: passage_id.into(),
            sentences,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), DerivationError> {
        if self.sentences.is_empty() || self.sentences.iter().any(|s| s.trim().is_empty()) {
            return Err(DerivationError::InvalidPassage(self.passage_id.clone()));
        }
        Ok(())
    }

    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A passage line in the passages file; `split` is required by `derive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageEntry {
    #[serde(flatten)]
    pub passage: Passage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivedSample {
    pub passage_id: String,
    pub source: String,
    pub relation: RelationKind,
    /// `None` when the hop ablation is active.
    pub hop: Option<Hop>,
    pub target: String,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationConfig {
    pub max_hop: Hop,
    pub include_paragraph: bool,
    pub include_reverse: bool,
    pub include_hop: bool,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            max_hop: Hop::new(3).expect("nonzero"),
            include_paragraph: true,
            include_reverse: true,
            include_hop: true,
        }
    }
}

pub fn derive_samples(
    g: &InfluenceGraph,
    p: &Passage,
    cfg: &DerivationConfig,
    split: Split,
) -> Result<Vec<DerivedSample>, DerivationError> {
    if g.passage_id != p.passage_id {
        return Err(DerivationError::PassageMismatch {
            graph: g.passage_id.clone(),
            passage: p.passage_id.clone(),
        });
    }
    p.check()?;
    let report = g.validate();
    if !report.is_clean() {
        return Err(DerivationError::InvalidGraph {
            passage_id: g.passage_id.clone(),
            report,
        });
    }

    let text: HashMap<&NodeId, &str> = g.nodes.iter().map(|n| (&n.id, n.text.trim())).collect();
    let mut seen: HashSet<(&NodeId, RelationKind, Hop, &NodeId)> = HashSet::new();
    let mut out = Vec::new();
    let paths = g.all_paths(cfg.max_hop);
    for path in &paths {
        let (s, t, hop, sign) = (path.source(), path.target(), path.hop(), path.sign());
        let forward = RelationKind::new(sign, Direction::Forward);
        if !seen.insert((s, forward, hop, t)) {
            continue;
        }
        let recorded_hop = cfg.include_hop.then_some(hop);
        let sample = |from: &NodeId, relation, to: &NodeId| DerivedSample {
            passage_id: g.passage_id.clone(),
            source: text[from].to_string(),
            relation,
            hop: recorded_hop,
            target: text[to].to_string(),
            split,
        };
        out.push(sample(s, forward, t));
        if cfg.include_reverse {
            out.push(sample(t, forward.invert(), s));
        }
    }
    Ok(out)
}

/// One graph together with its passage and inherited split.
#[derive(Debug, Clone, Copy)]
pub struct CorpusInput<'a> {
    pub graph: &'a InfluenceGraph,
    pub passage: &'a Passage,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub config: DerivationConfig,
    pub samples: Vec<DerivedSample>,
}

impl DatasetBundle {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DerivedSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Writes `samples.jsonl` and the `derivation.json` config sidecar into `dir`.
    pub fn write_dir(&self, dir: &FsPath) -> Result<(), DerivationError> {
        jsonl::write(dir.join(SAMPLES_FILE), &self.samples)?;
        let cfg_path = dir.join(CONFIG_FILE);
        let body = serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n";
        fs::write(&cfg_path, body).map_err(|e| DerivationError::Config {
            path: cfg_path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Reads a bundle written by [`DatasetBundle::write_dir`]. A missing
    /// config sidecar falls back to the default configuration.
    pub fn read_dir(dir: &FsPath) -> Result<Self, DerivationError> {
        let samples = jsonl::read(dir.join(SAMPLES_FILE))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let config = match fs::read_to_string(&cfg_path) {
            Ok(body) => serde_json::from_str(&body).map_err(|e| DerivationError::Config {
                path: cfg_path.display().to_string(),
                message: e.to_string(),
            })?,
            Err(_) => DerivationConfig::default(),
        };
        Ok(DatasetBundle { config, samples })
    }
}

/// Derives every input and groups the result by split, keeping input order within a split.
pub fn derive_corpus(
    inputs: &[CorpusInput<'_>],
    cfg: &DerivationConfig,
) -> Result<DatasetBundle, DerivationError> {
    let mut grouped: BTreeMap<Split, Vec<DerivedSample>> = BTreeMap::new();
    for input in inputs {
        let samples =
            derive_samples(input.graph, input.passage, cfg, input.split).map_err(|e| {
                DerivationError::InPassage {
                    passage_id: input.graph.passage_id.clone(),
                    source: Box::new(e),
                }
            })?;
        grouped.entry(input.split).or_default().extend(samples);
    }
    Ok(DatasetBundle {
        config: *cfg,
        samples: grouped.into_values().flatten().collect(),
    })
}

/// Matches graphs to passage entries by id.
pub fn pair_inputs<'a>(
    graphs: &'a [InfluenceGraph],
    passages: &'a [PassageEntry],
) -> Result<Vec<CorpusInput<'a>>, DerivationError> {
    let by_id: HashMap<&str, &PassageEntry> = passages
        .iter()
        .map(|e| (e.passage.passage_id.as_str(), e))
        .collect();
    graphs
        .iter()
        .map(|g| {
            let entry = by_id
                .get(g.passage_id.as_str())
                .ok_or_else(|| DerivationError::MissingPassage(g.passage_id.clone()))?;
            let split = entry
                .split
                .ok_or_else(|| DerivationError::MissingSplit(g.passage_id.clone()))?;
            Ok(CorpusInput {
                graph: g,
                passage: &entry.passage,
                split,
            })
        })
        .collect()
}

/// Sample counts per (split, relation, hop).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsTable {
    pub cells: BTreeMap<(Split, RelationKind, Option<Hop>), usize>,
    pub totals: BTreeMap<Split, usize>,
}

impl StatsTable {
    pub fn count(&self, split: Split, relation: RelationKind, hop: Option<Hop>) -> usize {
        self.cells
            .get(&(split, relation, hop))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, split: Split) -> usize {
        self.totals.get(&split).copied().unwrap_or(0)
    }

    pub fn grand_total(&self) -> usize {
        self.totals.values().sum()
    }

    /// Aligned plain-text layout: one row per (split, relation), one column per hop.
    pub fn to_text(&self) -> String {
        let hops: BTreeSet<Option<Hop>> = self.cells.keys().map(|k| k.2).collect();
        let mut header = vec!["Split".to_string(), "Relation Type".to_string()];
        header.extend(hops.iter().map(|h| match h {
            Some(h) => format!("{h}-Hop"),
            None => "No-Hop".to_string(),
        }));
        header.push("Total".to_string());

        let mut rows = vec![header];
        for split in Split::ALL {
            if !self.totals.contains_key(&split) {
                continue;
            }
            for (i, rel) in RelationKind::ALL.iter().enumerate() {
                let mut row = vec![split.to_string(), rel.surface().to_string()];
                row.extend(hops.iter().map(|h| self.count(split, *rel, *h).to_string()));
                row.push(if i == 0 {
                    self.total(split).to_string()
                } else {
                    String::new()
                });
                rows.push(row);
            }
        }

        let ncols = rows[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c < 2 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if ri == 0 {
                let rule: usize = widths.iter().sum::<usize>() + 2 * (ncols - 1);
                let _ = writeln!(out, "{}", "-".repeat(rule));
            }
        }
        out
    }
}

impl fmt::Display for StatsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn stats(bundle: &DatasetBundle) -> StatsTable {
    stats_of(&bundle.samples)
}

pub fn stats_of(samples: &[DerivedSample]) -> StatsTable {
    let mut table = StatsTable::default();
    for s in samples {
        *table.cells.entry((s.split, s.relation, s.hop)).or_default() += 1;
        *table.totals.entry(s.split).or_default() += 1;
    }
    table
}
