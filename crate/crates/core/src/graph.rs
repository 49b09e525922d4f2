//! Influence graphs: events connected by signed, directed edges, plus the
//! relation/sign algebra used to compose multi-hop influences.
//!
//! A chain of influences is negative iff it contains an odd number of
//! negative ("hurts") edges. Relations pair that sign with a direction, so
//! "is helped by" is the inverse view of "helps".

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::num::NonZeroU32;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("hop count must be at least 1")]
    ZeroHop,
    #[error("unrecognized relation `{0}`")]
    UnknownRelation(String),
    #[error("unrecognized sign `{0}`")]
    UnknownSign(String),
}

/// Edge polarity. Serialized as `"helps"` / `"hurts"` in graph files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "helps")]
    Positive,
    #[serde(rename = "hurts")]
    Negative,
}

impl Sign {
    pub fn is_negative(self) -> bool {
        self == Sign::Negative
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "helps",
            Sign::Negative => "hurts",
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl FromStr for Sign {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "helps" | "+" | "positive" => Ok(Sign::Positive),
            "hurts" | "-" | "negative" => Ok(Sign::Negative),
            other => Err(GraphError::UnknownSign(other.to_string())),
        }
    }
}

/// Composes a chain of edge signs: negative iff the number of negative signs is odd.
pub fn compose<I>(signs: I) -> Sign
where
    I: IntoIterator<Item = Sign>,
{
    let negatives = signs.into_iter().filter(|s| s.is_negative()).count();
    if negatives % 2 == 1 {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

/// One of the four influence relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationKind {
    pub sign: Sign,
    pub direction: Direction,
}

impl RelationKind {
    pub const HELPS: RelationKind = RelationKind::new(Sign::Positive, Direction::Forward);
    pub const HURTS: RelationKind = RelationKind::new(Sign::Negative, Direction::Forward);
    pub const HELPED_BY: RelationKind = RelationKind::new(Sign::Positive, Direction::Inverse);
    pub const HURT_BY: RelationKind = RelationKind::new(Sign::Negative, Direction::Inverse);

    /// Canonical ordering used by tables and reports.
    pub const ALL: [RelationKind; 4] = [
        RelationKind::HELPS,
        RelationKind::HURTS,
        RelationKind::HELPED_BY,
        RelationKind::HURT_BY,
    ];

    pub const fn new(sign: Sign, direction: Direction) -> Self {
        RelationKind { sign, direction }
    }

    pub fn surface(self) -> &'static str {
        match (self.sign, self.direction) {
            (Sign::Positive, Direction::Forward) => "helps",
            (Sign::Negative, Direction::Forward) => "hurts",
            (Sign::Positive, Direction::Inverse) => "is helped by",
            (Sign::Negative, Direction::Inverse) => "is hurt by",
        }
    }

    /// Flips direction and keeps the sign.
    pub fn invert(self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        };
        RelationKind { direction, ..self }
    }

    pub fn is_forward(self) -> bool {
        self.direction == Direction::Forward
    }
}

pub fn invert(rel: RelationKind) -> RelationKind {
    rel.invert()
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

impl FromStr for RelationKind {
    type Err = GraphError;

    /// Accepts the canonical surface forms plus hyphen/underscore slugs
    /// such as `helped-by` or `is_hurt_by`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == '_' { ' ' } else { c })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        let norm = norm.strip_prefix("is ").unwrap_or(&norm);
        match norm {
            "helps" => Ok(RelationKind::HELPS),
            "hurts" => Ok(RelationKind::HURTS),
            "helped by" => Ok(RelationKind::HELPED_BY),
            "hurt by" => Ok(RelationKind::HURT_BY),
            _ => Err(GraphError::UnknownRelation(s.to_string())),
        }
    }
}

impl Serialize for RelationKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.surface())
    }
}

impl<'de> Deserialize<'de> for RelationKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of edges between two events along a chain; always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Hop(NonZeroU32);

impl Hop {
    pub const ONE: Hop = Hop(NonZeroU32::MIN);

    pub fn new(count: u32) -> Result<Self, GraphError> {
        NonZeroU32::new(count).map(Hop).ok_or(GraphError::ZeroHop)
    }

    pub fn count(self) -> u32 {
        self.0.get()
    }
}

impl TryFrom<u32> for Hop {
    type Error = GraphError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Hop::new(value)
    }
}

impl From<Hop> for u32 {
    fn from(h: Hop) -> u32 {
        h.count()
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventNode {
    pub id: NodeId,
    pub text: String,
    /// Distance from the seed for generated nodes; absent in curated graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop: Option<Hop>,
}

impl EventNode {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        EventNode {
            id: NodeId(id.into()),
            text: text.into(),
            hop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub sign: Sign,
}

impl InfluenceEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>, sign: Sign) -> Self {
        InfluenceEdge {
            source: NodeId(source.into()),
            target: NodeId(target.into()),
            sign,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InfluenceGraph {
    pub passage_id: String,
    pub nodes: Vec<EventNode>,
    pub edges: Vec<InfluenceEdge>,
}

/// A simple directed path through a graph along with the sign of each edge taken.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub signs: Vec<Sign>,
}

impl Path {
    pub fn source(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn target(&self) -> &NodeId {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn hop(&self) -> Hop {
        Hop::new(self.signs.len() as u32).expect("paths have at least one edge")
    }

    pub fn sign(&self) -> Sign {
        compose(self.signs.iter().copied())
    }
}

impl InfluenceGraph {
    pub fn new(passage_id: impl Into<String>) -> Self {
        InfluenceGraph {
            passage_id: passage_id.into(),
            ..Default::default()
        }
    }

    pub fn node(&self, id: &NodeId) -> Option<&EventNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn node_text(&self, id: &NodeId) -> Option<&str> {
        self.node(id).map(|n| n.text.as_str())
    }

    /// Outgoing edges per node, sorted by (target id, sign).
    fn adjacency(&self) -> HashMap<&NodeId, Vec<(&NodeId, Sign)>> {
        let mut adj: HashMap<&NodeId, Vec<(&NodeId, Sign)>> = HashMap::new();
        for e in &self.edges {
            adj.entry(&e.source).or_default().push((&e.target, e.sign));
        }
        for out in adj.values_mut() {
            out.sort();
            out.dedup();
        }
        adj
    }

    /// Every simple path leaving `source` with 1..=`max_hop` edges, in
    /// lexicographic order of node-id sequences (a prefix sorts before its
    /// extensions), ties between parallel edges broken positive first.
    pub fn enumerate_paths(&self, source: &NodeId, max_hop: Hop) -> Result<Vec<Path>, GraphError> {
        if !self.contains(source) {
            return Err(GraphError::UnknownNode(source.0.clone()));
        }
        let adj = self.adjacency();
        let mut out = Vec::new();
        let mut nodes = vec![source];
        let mut signs = Vec::new();
        let mut on_path: HashSet<&NodeId> = HashSet::from([source]);
        extend_paths(
            &adj,
            max_hop.count() as usize,
            &mut nodes,
            &mut signs,
            &mut on_path,
            &mut out,
        );
        // DFS order already matches except between parallel edges of opposite sign.
        out.sort();
        Ok(out)
    }

    /// Paths from every node, in node-id order.
    pub fn all_paths(&self, max_hop: Hop) -> Vec<Path> {
        let mut ids: Vec<&NodeId> = self.nodes.iter().map(|n| &n.id).collect();
        ids.sort();
        ids.dedup();
        ids.into_iter()
            .flat_map(|id| self.enumerate_paths(id, max_hop).unwrap_or_default())
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

fn extend_paths<'g>(
    adj: &HashMap<&'g NodeId, Vec<(&'g NodeId, Sign)>>,
    max_edges: usize,
    nodes: &mut Vec<&'g NodeId>,
    signs: &mut Vec<Sign>,
    on_path: &mut HashSet<&'g NodeId>,
    out: &mut Vec<Path>,
) {
    if signs.len() == max_edges {
        return;
    }
    let last = nodes[nodes.len() - 1];
    let Some(next) = adj.get(last) else { return };
    for &(target, sign) in next {
        if on_path.contains(target) {
            continue;
        }
        nodes.push(target);
        signs.push(sign);
        on_path.insert(target);
        out.push(Path {
            nodes: nodes.iter().map(|&n| n.clone()).collect(),
            signs: signs.clone(),
        });
        extend_paths(adj, max_edges, nodes, signs, on_path, out);
        on_path.remove(target);
        signs.pop();
        nodes.pop();
    }
}

pub fn enumerate_paths(
    g: &InfluenceGraph,
    source: &NodeId,
    max_hop: Hop,
) -> Result<Vec<Path>, GraphError> {
    g.enumerate_paths(source, max_hop)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DanglingEndpoint {
        edge: usize,
        node: NodeId,
    },
    SelfLoop {
        edge: usize,
        node: NodeId,
    },
    DuplicateEdge {
        edge: usize,
        first: usize,
    },
    EmptyNodeText {
        node: NodeId,
    },
    DuplicateNodeId {
        node: NodeId,
    },
    /// Same ordered pair carries both signs. Reported but tolerated.
    ContradictoryEdges {
        source: NodeId,
        target: NodeId,
    },
}

impl Finding {
    /// Whether the finding breaks a graph invariant (as opposed to a warning).
    pub fn is_error(&self) -> bool {
        !matches!(self, Finding::ContradictoryEdges { .. })
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DanglingEndpoint { edge, node } => {
                write!(f, "edge #{edge} references unknown node `{node}`")
            }
            Finding::SelfLoop { edge, node } => {
                write!(f, "edge #{edge} is a self-loop on `{node}`")
            }
            Finding::DuplicateEdge { edge, first } => {
                write!(f, "edge #{edge} duplicates edge #{first}")
            }
            Finding::EmptyNodeText { node } => write!(f, "node `{node}` has empty text"),
            Finding::DuplicateNodeId { node } => {
                write!(f, "node id `{node}` is declared more than once")
            }
            Finding::ContradictoryEdges { source, target } => {
                write!(f, "`{source}` both helps and hurts `{target}`")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// No invariant-breaking findings (warnings allowed).
    pub fn is_clean(&self) -> bool {
        self.findings.iter().all(|f| !f.is_error())
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.is_error())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.findings.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate(g: &InfluenceGraph) -> ValidationReport {
    let mut findings = Vec::new();
    let mut ids = HashSet::new();
    for n in &g.nodes {
        if !ids.insert(&n.id) {
            findings.push(Finding::DuplicateNodeId { node: n.id.clone() });
        }
        if n.text.trim().is_empty() {
            findings.push(Finding::EmptyNodeText { node: n.id.clone() });
        }
    }
    let mut seen: HashMap<&InfluenceEdge, usize> = HashMap::new();
    let mut signs_per_pair: BTreeMap<(&NodeId, &NodeId), HashSet<Sign>> = BTreeMap::new();
    for (i, e) in g.edges.iter().enumerate() {
        for endpoint in [&e.source, &e.target] {
            if !ids.contains(endpoint) {
                findings.push(Finding::DanglingEndpoint {
                    edge: i,
                    node: endpoint.clone(),
                });
            }
        }
        if e.source == e.target {
            findings.push(Finding::SelfLoop {
                edge: i,
                node: e.source.clone(),
            });
        }
        match seen.get(e) {
            Some(&first) => findings.push(Finding::DuplicateEdge { edge: i, first }),
            None => {
                seen.insert(e, i);
            }
        }
        signs_per_pair
            .entry((&e.source, &e.target))
            .or_default()
            .insert(e.sign);
    }
    for ((s, t), signs) in signs_per_pair {
        if signs.len() > 1 {
            findings.push(Finding::ContradictoryEdges {
                source: s.clone(),
                target: t.clone(),
            });
        }
    }
    ValidationReport { findings }
}
