//! Builds an influence graph around a seed event by asking the generator for
//! one influence per (relation, hop) pair.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::thread;

use thiserror::Error;

use crate::backend::{
    self, BackendError, GenerationRequest, GenerationResult, Generator, SamplingParams,
};
use crate::derivation::Passage;
use crate::graph::{
    Direction, EventNode, Hop, InfluenceEdge, InfluenceGraph, NodeId, RelationKind,
};
use crate::templating::{collapse_whitespace, render_query, TemplateError};

pub const SEED_ID: &str = "n0";

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid build spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("generation failed for ({relation}, {hop}-hop): {source}")]
    Backend {
        relation: RelationKind,
        hop: Hop,
        #[source]
        source: BackendError,
    },
}

impl BuildError {
    pub fn is_transport(&self) -> bool {
        matches!(self, BuildError::Backend { source, .. } if source.is_transport())
    }
}

#[derive(Debug, Clone)]
pub struct BuildSpec {
    pub passage: Passage,
    pub seed: String,
    pub relations: BTreeSet<RelationKind>,
    pub hops: BTreeSet<Hop>,
    pub dedup: bool,
    pub params: SamplingParams,
}

impl BuildSpec {
    pub fn new(
        passage: Passage,
        seed: impl Into<String>,
        relations: impl IntoIterator<Item = RelationKind>,
        hops: impl IntoIterator<Item = Hop>,
    ) -> Self {
        BuildSpec {
            passage,
            seed: seed.into(),
            relations: relations.into_iter().collect(),
            hops: hops.into_iter().collect(),
            dedup: true,
            params: SamplingParams::default(),
        }
    }

    fn check(&self) -> Result<(), BuildError> {
        if self.seed.trim().is_empty() {
            return Err(BuildError::InvalidSpec("seed event is empty".into()));
        }
        if self.relations.is_empty() {
            return Err(BuildError::InvalidSpec("no relations requested".into()));
        }
        if self.hops.is_empty() {
            return Err(BuildError::InvalidSpec("no hops requested".into()));
        }
        self.passage
            .check()
            .map_err(|e| BuildError::InvalidSpec(e.to_string()))?;
        self.params
            .check()
            .map_err(|e| BuildError::InvalidSpec(e.to_string()))
    }

    /// Queries in canonical order: relation order of [`RelationKind::ALL`], then hop.
    pub fn queries(&self) -> Vec<(RelationKind, Hop)> {
        RelationKind::ALL
            .iter()
            .filter(|r| self.relations.contains(r))
            .flat_map(|r| self.hops.iter().map(move |h| (*r, *h)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOutcome {
    pub graph: InfluenceGraph,
    pub warnings: Vec<String>,
}

/// Lowercase, collapse whitespace, drop trailing punctuation.
pub fn normalize_event(text: &str) -> String {
    collapse_whitespace(&text.to_lowercase())
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
        .to_string()
}

pub fn build_graph(spec: &BuildSpec, gen: &dyn Generator) -> Result<BuildOutcome, BuildError> {
    spec.check()?;
    let seed_text = collapse_whitespace(&spec.seed);
    let queries = spec.queries();
    let requests = queries
        .iter()
        .map(|(rel, hop)| {
            render_query(Some(&spec.passage), &seed_text, *rel, Some(*hop))
                .map(|q| GenerationRequest::with_params(q.into_string(), spec.params.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let results = fan_out(gen, &requests);

    let mut generated = Vec::with_capacity(results.len());
    for ((relation, hop), result) in queries.iter().zip(results) {
        match result {
            Ok(r) => generated.push((*relation, *hop, r)),
            Err(source) => {
                return Err(BuildError::Backend {
                    relation: *relation,
                    hop: *hop,
                    source,
                })
            }
        }
    }
    Ok(assemble(spec, &seed_text, generated))
}

fn fan_out(
    gen: &dyn Generator,
    requests: &[GenerationRequest],
) -> Vec<Result<GenerationResult, BackendError>> {
    let width = gen.max_in_flight().max(1);
    let mut results = Vec::with_capacity(requests.len());
    for chunk in requests.chunks(width) {
        thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|req| scope.spawn(move || backend::generate(gen, req)))
                .collect();
            for h in handles {
                results.push(h.join().expect("generation worker panicked"));
            }
        });
    }
    results
}

fn assemble(
    spec: &BuildSpec,
    seed_text: &str,
    generated: Vec<(RelationKind, Hop, GenerationResult)>,
) -> BuildOutcome {
    let seed_id = NodeId::new(SEED_ID);
    let mut graph = InfluenceGraph::new(spec.passage.passage_id.clone());
    graph.nodes.push(EventNode::new(SEED_ID, seed_text));
    let mut warnings = Vec::new();
    let mut by_key: HashMap<String, NodeId> = HashMap::new();
    let seed_key = normalize_event(seed_text);

    for (relation, hop, result) in generated {
        let label = format!("({relation}, {hop}-hop)");
        let text = collapse_whitespace(&result.text);
        if text.is_empty() {
            warnings.push(format!("{label}: empty generation skipped"));
            continue;
        }
        let key = normalize_event(&text);
        if key == seed_key {
            warnings.push(format!(
                "{label}: generation repeats the seed event, skipped"
            ));
            continue;
        }
        let existing = if spec.dedup {
            by_key.get(&key).cloned()
        } else {
            None
        };
        let id = match existing {
            Some(id) => id,
            None => {
                let id = NodeId::new(format!("n{}", graph.nodes.len()));
                graph.nodes.push(EventNode {
                    id: id.clone(),
                    text,
                    hop: Some(hop),
                });
                by_key.entry(key).or_insert_with(|| id.clone());
                id
            }
        };
        let edge = match relation.direction {
            Direction::Forward => InfluenceEdge {
                source: seed_id.clone(),
                target: id,
                sign: relation.sign,
            },
            Direction::Inverse => InfluenceEdge {
                source: id,
                target: seed_id.clone(),
                sign: relation.sign,
            },
        };
        if graph.edges.contains(&edge) {
            warnings.push(format!(
                "{label}: duplicate edge to an existing node skipped"
            ));
            continue;
        }
        graph.edges.push(edge);
    }
    BuildOutcome { graph, warnings }
}

/// Human-readable edge listing, one edge per line.
pub fn adjacency_listing(g: &InfluenceGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# passage: {}", g.passage_id);
    for n in &g.nodes {
        match n.hop {
            Some(h) => {
                let _ = writeln!(out, "{}\t{}\t(hop {h})", n.id, n.text);
            }
            None => {
                let _ = writeln!(out, "{}\t{}", n.id, n.text);
            }
        }
    }
    for e in &g.edges {
        let src = g.node_text(&e.source).unwrap_or("?");
        let tgt = g.node_text(&e.target).unwrap_or("?");
        let _ = writeln!(out, "{src} --{}--> {tgt}", e.sign.as_str());
    }
    out
}
