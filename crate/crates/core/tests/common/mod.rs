#![allow(dead_code)]

use std::collections::BTreeSet;

use eigenkit::graph::{EventNode, InfluenceEdge, InfluenceGraph, Sign};
use eigenkit::Passage;
use rand::Rng;

pub const PHOTOSYNTHESIS: [&str; 3] = [
    "Plants take in carbon dioxide and water.",
    "Chlorophyll in the leaves traps sunlight.",
    "The plant uses the energy to make sugar and grow.",
];

pub fn photosynthesis() -> Passage {
    Passage::new(
        "photosynthesis",
        PHOTOSYNTHESIS.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

/// Curated-style version of the seed-centred example graph.
pub fn sunlight_graph() -> InfluenceGraph {
    InfluenceGraph {
        passage_id: "photosynthesis".into(),
        nodes: vec![
            EventNode::new("more sunlight", "more sunlight"),
            EventNode::new("bright skies", "bright skies"),
            EventNode::new("cloudy skies", "cloudy skies"),
            EventNode::new("plants trap sunlight", "plants trap sunlight"),
            EventNode::new("plants grow taller", "plants grow taller"),
        ],
        edges: vec![
            InfluenceEdge::new("bright skies", "more sunlight", Sign::Positive),
            InfluenceEdge::new("cloudy skies", "more sunlight", Sign::Negative),
            InfluenceEdge::new("more sunlight", "plants trap sunlight", Sign::Positive),
            InfluenceEdge::new("plants trap sunlight", "plants grow taller", Sign::Positive),
        ],
    }
}

pub fn node_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Graph over `n` nodes from explicit (source, target, sign) triples.
pub fn graph_from(passage_id: &str, n: usize, edges: &[(usize, usize, Sign)]) -> InfluenceGraph {
    let ids = node_ids(n);
    InfluenceGraph {
        passage_id: passage_id.into(),
        nodes: ids
            .iter()
            .map(|id| EventNode::new(id.clone(), format!("event {id}")))
            .collect(),
        edges: edges
            .iter()
            .map(|&(s, t, sign)| InfluenceEdge::new(ids[s].clone(), ids[t].clone(), sign))
            .collect(),
    }
}

/// Random loop-free graph with unique (source, target, sign) triples.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    passage_id: &str,
    n: usize,
    density: f64,
) -> InfluenceGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            for sign in [Sign::Positive, Sign::Negative] {
                if rng.gen_bool(density / 2.0) {
                    edges.push((s, t, sign));
                }
            }
        }
    }
    graph_from(passage_id, n, &edges)
}

/// Random DAG: edges only go from lower to higher index.
pub fn random_dag<R: Rng>(rng: &mut R, passage_id: &str, n: usize, density: f64) -> InfluenceGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in s + 1..n {
            if rng.gen_bool(density) {
                let sign = if rng.gen_bool(0.5) {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                edges.push((s, t, sign));
            }
        }
    }
    graph_from(passage_id, n, &edges)
}

/// A walk with the edge sign chosen at each step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OraclePath {
    pub nodes: Vec<String>,
    pub signs: Vec<Sign>,
}

/// Every walk from `source` with 1..=max_edges steps, enumerated breadth-first
/// over all node sequences and edge choices, then filtered to simple paths.
pub fn brute_force_simple_paths(
    g: &InfluenceGraph,
    source: &str,
    max_edges: usize,
) -> Vec<OraclePath> {
    let mut frontier = vec![OraclePath {
        nodes: vec![source.to_string()],
        signs: vec![],
    }];
    let mut walks = Vec::new();
    for _ in 0..max_edges {
        let mut next = Vec::new();
        for w in &frontier {
            let last = w.nodes.last().unwrap();
            for e in &g.edges {
                if e.source.as_str() == last {
                    let mut nw = w.clone();
                    nw.nodes.push(e.target.as_str().to_string());
                    nw.signs.push(e.sign);
                    next.push(nw);
                }
            }
        }
        walks.extend(next.iter().cloned());
        frontier = next;
    }
    let mut simple: Vec<OraclePath> = walks
        .into_iter()
        .filter(|w| w.nodes.iter().collect::<BTreeSet<_>>().len() == w.nodes.len())
        .collect();
    simple.sort();
    simple.dedup();
    simple
}

/// Sign by multiplying one edge at a time.
pub fn stepwise_sign(signs: &[Sign]) -> Sign {
    signs.iter().fold(Sign::Positive, |acc, &s| acc * s)
}

/// Sign by counting negative edges.
pub fn parity_sign(signs: &[Sign]) -> Sign {
    let mut negatives = 0;
    for s in signs {
        if *s == Sign::Negative {
            negatives += 1;
        }
    }
    if negatives % 2 == 1 {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// Distinct (source, sign, hop, target) tuples over all simple paths of the graph.
pub fn brute_force_tuples(
    g: &InfluenceGraph,
    max_edges: usize,
) -> BTreeSet<(String, Sign, usize, String)> {
    let mut out = BTreeSet::new();
    for n in &g.nodes {
        for p in brute_force_simple_paths(g, n.id.as_str(), max_edges) {
            out.insert((
                p.nodes[0].clone(),
                parity_sign(&p.signs),
                p.signs.len(),
                p.nodes.last().unwrap().clone(),
            ));
        }
    }
    out
}
