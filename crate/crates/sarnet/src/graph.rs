//! Rooted sensor-network representation and diffusion-set partitioning.
//!
//! A [`Network`] is an undirected graph with a designated sink in which
//! every node is reachable from the sink. Nodes at the same hop distance
//! from the sink are grouped into *diffusion sets*: maximal groups
//! connected through the shares-next-neighbour relation (two nodes are
//! related when they have a common neighbour one hop further from the
//! sink). Interference — the number of children a node carries in a
//! collection tree — drives the classification of nodes into epidemic
//! states via two thresholds.

use std::collections::VecDeque;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque node identifier. Ordering is lexicographic, which is what every
/// deterministic output in this crate is keyed on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

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
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Epidemic state of a node, decided by its interference weight against
/// the thresholds `t1 <= t2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpidemicState {
    /// Weight below `t1`: operating normally.
    Susceptible,
    /// Weight in `[t1, t2)`: heavily interfering but still operational.
    Attacked,
    /// Weight at or above `t2`: no longer functional.
    Removed,
}

impl fmt::Display for EpidemicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpidemicState::Susceptible => "susceptible",
            EpidemicState::Attacked => "attacked",
            EpidemicState::Removed => "removed",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no `sink` directive in input")]
    MissingSink,
    #[error("self-loop on node `{0}`")]
    SelfLoop(NodeId),
    #[error("duplicate edge `{0}`-`{1}`")]
    DuplicateEdge(NodeId, NodeId),
    #[error("negative weight {weight} on node `{node}`")]
    NegativeWeight { node: NodeId, weight: f64 },
    #[error("node(s) unreachable from sink `{sink}`: {}", join_ids(.nodes))]
    Unreachable { sink: NodeId, nodes: Vec<NodeId> },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("the sink node `{0}` cannot be removed")]
    RemoveSink(NodeId),
    #[error("invalid thresholds t1={t1}, t2={t2}: need finite 0 <= t1 <= t2")]
    InvalidThresholds { t1: f64, t2: f64 },
    #[error("weight {0} is not classifiable: need a finite non-negative value")]
    InvalidWeight(f64),
    #[error("invalid spanning tree: {0}")]
    InvalidTree(String),
}

fn join_ids(ids: &[NodeId]) -> String {
    let strs: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
    strs.join(", ")
}

/// Undirected rooted network with optional per-node interference weights.
///
/// Invariants (enforced at construction): the sink belongs to the node
/// set, there are no self-loops or duplicate edges, weights are finite
/// and non-negative, and every node is reachable from the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sink: NodeId,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    weights: BTreeMap<NodeId, f64>,
}

impl Network {
    /// Builds and validates a network. The node set is the sink plus
    /// every edge endpoint and every weighted node.
    pub fn new(
        sink: NodeId,
        edges: &[(NodeId, NodeId)],
        weights: &[(NodeId, f64)],
    ) -> Result<Self, GraphError> {
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        adjacency.entry(sink.clone()).or_default();

        let mut seen = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u.clone()));
            }
            let key = if u < v {
                (u.clone(), v.clone())
            } else {
                (v.clone(), u.clone())
            };
            if !seen.insert(key.clone()) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            adjacency.entry(u.clone()).or_default().insert(v.clone());
            adjacency.entry(v.clone()).or_default().insert(u.clone());
        }

        let mut weight_map = BTreeMap::new();
        for (node, w) in weights {
            if !w.is_finite() || *w < 0.0 {
                return Err(GraphError::NegativeWeight {
                    node: node.clone(),
                    weight: *w,
                });
            }
            adjacency.entry(node.clone()).or_default();
            weight_map.insert(node.clone(), *w);
        }

        let net = Network {
            sink,
            adjacency,
            weights: weight_map,
        };
        let reachable = net.reachable_from_sink();
        if reachable.len() != net.adjacency.len() {
            let nodes: Vec<NodeId> = net
                .adjacency
                .keys()
                .filter(|n| !reachable.contains(*n))
                .cloned()
                .collect();
            return Err(GraphError::Unreachable {
                sink: net.sink,
                nodes,
            });
        }
        Ok(net)
    }

    /// Parses the line-oriented graph file format.
    ///
    /// Comment lines start with `#`; blank lines are ignored. Directives
    /// (whitespace-separated tokens): exactly one `sink <id>`, any number
    /// of `edge <u> <v>` and `weight <id> <real>` lines. Anything else is
    /// a parse error. Weights default to 0 when absent.
    pub fn parse(source: &str) -> Result<Self, GraphError> {
        let mut sink: Option<NodeId> = None;
        let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
        let mut weights: Vec<(NodeId, f64)> = Vec::new();
        let mut seen_edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let mut seen_weights: BTreeSet<NodeId> = BTreeSet::new();

        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let err = |message: String| GraphError::Parse { line, message };
            match tokens[0] {
                "sink" => {
                    if tokens.len() != 2 {
                        return Err(err("expected `sink <id>`".into()));
                    }
                    if sink.is_some() {
                        return Err(err("duplicate `sink` directive".into()));
                    }
                    sink = Some(NodeId::from(tokens[1]));
                }
                "edge" => {
                    if tokens.len() != 3 {
                        return Err(err("expected `edge <u> <v>`".into()));
                    }
                    let (u, v) = (NodeId::from(tokens[1]), NodeId::from(tokens[2]));
                    if u == v {
                        return Err(err(format!("self-loop on node `{u}`")));
                    }
                    let key = if u < v {
                        (u.clone(), v.clone())
                    } else {
                        (v.clone(), u.clone())
                    };
                    if !seen_edges.insert(key) {
                        return Err(err(format!("duplicate edge `{u}`-`{v}`")));
                    }
                    edges.push((u, v));
                }
                "weight" => {
                    if tokens.len() != 3 {
                        return Err(err("expected `weight <id> <real>`".into()));
                    }
                    let node = NodeId::from(tokens[1]);
                    let w: f64 = tokens[2]
                        .parse()
                        .map_err(|_| err(format!("bad weight value `{}`", tokens[2])))?;
                    if !w.is_finite() || w < 0.0 {
                        return Err(err(format!(
                            "weight for `{node}` must be finite and non-negative, got {w}"
                        )));
                    }
                    if !seen_weights.insert(node.clone()) {
                        return Err(err(format!("duplicate weight for node `{node}`")));
                    }
                    weights.push((node, w));
                }
                other => {
                    return Err(err(format!("unknown directive `{other}`")));
                }
            }
        }

        let sink = sink.ok_or(GraphError::MissingSink)?;
        Network::new(sink, &edges, &weights)
    }

    pub fn sink(&self) -> &NodeId {
        &self.sink
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.adjacency.keys()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.adjacency.contains_key(node)
    }

    pub fn neighbors(&self, node: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(node).into_iter().flatten()
    }

    pub fn has_edge(&self, u: &NodeId, v: &NodeId) -> bool {
        self.adjacency.get(u).is_some_and(|set| set.contains(v))
    }

    /// Edges as ordered pairs `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (u, nbrs) in &self.adjacency {
            for v in nbrs {
                if u < v {
                    out.push((u.clone(), v.clone()));
                }
            }
        }
        out
    }

    /// Interference weight of a node; 0 when none was supplied.
    pub fn weight(&self, node: &NodeId) -> f64 {
        self.weights.get(node).copied().unwrap_or(0.0)
    }

    /// Nodes that carry an explicit weight, in lexicographic order.
    pub fn explicit_weights(&self) -> impl Iterator<Item = (&NodeId, f64)> {
        self.weights.iter().map(|(n, w)| (n, *w))
    }

    fn reachable_from_sink(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.sink.clone());
        queue.push_back(self.sink.clone());
        while let Some(node) = queue.pop_front() {
            for next in self.neighbors(&node) {
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        seen
    }

    /// BFS hop distances from the sink.
    pub fn compute_depths(&self) -> DepthMap {
        let mut depth = BTreeMap::new();
        let mut queue = VecDeque::new();
        depth.insert(self.sink.clone(), 0u32);
        queue.push_back(self.sink.clone());
        while let Some(node) = queue.pop_front() {
            let d = depth[&node];
            for next in self.neighbors(&node) {
                if !depth.contains_key(next) {
                    depth.insert(next.clone(), d + 1);
                    queue.push_back(next.clone());
                }
            }
        }
        DepthMap { depth }
    }

    /// Partitions the node set into diffusion sets.
    ///
    /// Within each depth level, two nodes are related when they share a
    /// neighbour at the next depth; diffusion sets are the connected
    /// components of that relation (nodes related to nobody become
    /// singletons). Sets are emitted in ascending depth order, ties
    /// broken by the lexicographically smallest member.
    pub fn partition_diffusion_sets(&self, depths: &DepthMap) -> DiffusionPartition {
        let mut by_depth: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
        for (node, d) in &depths.depth {
            by_depth.entry(*d).or_default().push(node.clone());
        }

        let mut sets: Vec<BTreeSet<NodeId>> = Vec::new();
        for (level, members) in &by_depth {
            // members comes from a BTreeMap walk, hence sorted
            let index_of: BTreeMap<&NodeId, usize> =
                members.iter().enumerate().map(|(i, n)| (n, i)).collect();
            let mut dsu = DisjointSets::new(members.len());

            // Every node one level deeper links all of its parents at
            // this level into one component.
            if let Some(children) = by_depth.get(&(level + 1)) {
                for child in children {
                    let mut parents = self
                        .neighbors(child)
                        .filter(|n| depths.depth.get(*n) == Some(level));
                    if let Some(first) = parents.next() {
                        let root = index_of[first];
                        for other in parents {
                            dsu.union(root, index_of[other]);
                        }
                    }
                }
            }

            let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
            for (i, node) in members.iter().enumerate() {
                groups.entry(dsu.find(i)).or_default().insert(node.clone());
            }
            let mut level_sets: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
            // ascending by smallest member; sets are non-empty by construction
            level_sets.sort_by(|a, b| a.first().cmp(&b.first()));
            sets.extend(level_sets);
        }

        let mut index = BTreeMap::new();
        for (pos, set) in sets.iter().enumerate() {
            for node in set {
                index.insert(node.clone(), pos);
            }
        }
        DiffusionPartition { sets, index }
    }

    /// Removes a node together with its incident links. Nodes that lose
    /// their route to the sink are dropped as well and reported in
    /// [`NodeRemoval::orphaned`].
    pub fn remove_node(&self, victim: &NodeId) -> Result<NodeRemoval, GraphError> {
        if !self.contains(victim) {
            return Err(GraphError::UnknownNode(victim.clone()));
        }
        if victim == &self.sink {
            return Err(GraphError::RemoveSink(victim.clone()));
        }

        let edges: Vec<(NodeId, NodeId)> = self
            .edges()
            .into_iter()
            .filter(|(u, v)| u != victim && v != victim)
            .collect();

        // BFS over the surviving adjacency to find who still reaches the sink.
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (u, v) in &edges {
            adjacency.entry(u.clone()).or_default().push(v.clone());
            adjacency.entry(v.clone()).or_default().push(u.clone());
        }
        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::new();
        reachable.insert(self.sink.clone());
        queue.push_back(self.sink.clone());
        while let Some(node) = queue.pop_front() {
            for next in adjacency.get(&node).into_iter().flatten() {
                if reachable.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }

        let orphaned: Vec<NodeId> = self
            .adjacency
            .keys()
            .filter(|n| *n != victim && !reachable.contains(*n))
            .cloned()
            .collect();

        let kept_edges: Vec<(NodeId, NodeId)> = edges
            .into_iter()
            .filter(|(u, v)| reachable.contains(u) && reachable.contains(v))
            .collect();
        let kept_weights: Vec<(NodeId, f64)> = self
            .weights
            .iter()
            .filter(|(n, _)| reachable.contains(n))
            .map(|(n, w)| (n.clone(), *w))
            .collect();

        let network = Network::new(self.sink.clone(), &kept_edges, &kept_weights)?;
        Ok(NodeRemoval { network, orphaned })
    }
}

/// Result of [`Network::remove_node`].
#[derive(Debug, Clone)]
pub struct NodeRemoval {
    /// The surviving network.
    pub network: Network,
    /// Nodes dropped because the removal disconnected them from the sink,
    /// in lexicographic order. Does not include the removed node itself.
    pub orphaned: Vec<NodeId>,
}

/// Hop distances from the sink; `depth(sink) = 0` and every other node
/// satisfies `depth(n) = 1 + min over neighbours m of depth(m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    depth: BTreeMap<NodeId, u32>,
}

impl DepthMap {
    pub fn depth(&self, node: &NodeId) -> Option<u32> {
        self.depth.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, u32)> {
        self.depth.iter().map(|(n, d)| (n, *d))
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.values().copied().max().unwrap_or(0)
    }
}

/// Ordered list of pairwise-disjoint diffusion sets covering all nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffusionPartition {
    sets: Vec<BTreeSet<NodeId>>,
    index: BTreeMap<NodeId, usize>,
}

impl DiffusionPartition {
    pub fn sets(&self) -> &[BTreeSet<NodeId>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Position of the set containing `node`, if any.
    pub fn set_of(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }
}

/// Classifies a node's interference weight into an epidemic state:
/// susceptible below `t1`, attacked in `[t1, t2)`, removed at or above
/// `t2`.
pub fn classify_node(weight: f64, t1: f64, t2: f64) -> Result<EpidemicState, GraphError> {
    if !t1.is_finite() || !t2.is_finite() || t1 < 0.0 || t1 > t2 {
        return Err(GraphError::InvalidThresholds { t1, t2 });
    }
    if !weight.is_finite() || weight < 0.0 {
        return Err(GraphError::InvalidWeight(weight));
    }
    Ok(if weight < t1 {
        EpidemicState::Susceptible
    } else if weight < t2 {
        EpidemicState::Attacked
    } else {
        EpidemicState::Removed
    })
}

/// Counts the children each node carries in a collection tree given as a
/// child → parent map over the network. The map must cover every
/// non-sink node exactly once, must not assign a parent to the sink, and
/// every parent link must be an edge of the network.
pub fn tree_interference(
    net: &Network,
    parents: &BTreeMap<NodeId, NodeId>,
) -> Result<BTreeMap<NodeId, u32>, GraphError> {
    for (child, parent) in parents {
        if !net.contains(child) {
            return Err(GraphError::InvalidTree(format!(
                "tree node `{child}` is not in the network"
            )));
        }
        if child == net.sink() {
            return Err(GraphError::InvalidTree(format!(
                "the sink `{child}` must not have a parent"
            )));
        }
        if !net.has_edge(child, parent) {
            return Err(GraphError::InvalidTree(format!(
                "parent link `{child}` -> `{parent}` is not a network edge"
            )));
        }
    }
    for node in net.nodes() {
        if node != net.sink() && !parents.contains_key(node) {
            return Err(GraphError::InvalidTree(format!(
                "node `{node}` has no parent"
            )));
        }
    }

    // Walk each node to the root; a walk longer than the node count means
    // a parent cycle that never reaches the sink.
    let limit = net.node_count();
    for start in parents.keys() {
        let mut current = start;
        let mut steps = 0usize;
        while let Some(parent) = parents.get(current) {
            current = parent;
            steps += 1;
            if steps > limit {
                return Err(GraphError::InvalidTree(format!(
                    "parent cycle involving `{start}`"
                )));
            }
        }
        if current != net.sink() {
            return Err(GraphError::InvalidTree(format!(
                "walk from `{start}` ends at `{current}`, not the sink"
            )));
        }
    }

    let mut counts: BTreeMap<NodeId, u32> = net.nodes().map(|n| (n.clone(), 0)).collect();
    for parent in parents.values() {
        *counts.get_mut(parent).expect("parent validated above") += 1;
    }
    Ok(counts)
}

/// Parses a collection-tree file: `#` comments, blank lines, and
/// `parent <child> <parent>` directives.
pub fn parse_tree(source: &str) -> Result<BTreeMap<NodeId, NodeId>, GraphError> {
    let mut parents = BTreeMap::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let err = |message: String| GraphError::Parse { line, message };
        if tokens[0] != "parent" {
            return Err(err(format!("unknown directive `{}`", tokens[0])));
        }
        if tokens.len() != 3 {
            return Err(err("expected `parent <child> <parent>`".into()));
        }
        let (child, parent) = (NodeId::from(tokens[1]), NodeId::from(tokens[2]));
        if child == parent {
            return Err(err(format!("node `{child}` cannot be its own parent")));
        }
        if parents.insert(child.clone(), parent).is_some() {
            return Err(err(format!("duplicate parent for node `{child}`")));
        }
    }
    Ok(parents)
}

/// Union-find with path halving and union by size.
struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The random network of the worked partition example: sink `s`, three
    /// depth-1 nodes a, b, c (a and b share d; b and c share f), depth-2
    /// nodes d, e (sharing h) and f, g (sharing i), depth-3 nodes h, i.
    pub(crate) const EXAMPLE_NETWORK: &str = "\
# random network with ten nodes
sink s
edge s a
edge s b
edge s c
edge a d
edge b d
edge b f
edge c f
edge a e
edge c g
edge d h
edge e h
edge f i
edge g i
";

    fn id(s: &str) -> NodeId {
        NodeId::from(s)
    }

    fn set(ids: &[&str]) -> BTreeSet<NodeId> {
        ids.iter().map(|s| id(s)).collect()
    }

    #[test]
    fn parse_fig_network() {
        let net = Network::parse(EXAMPLE_NETWORK).unwrap();
        assert_eq!(net.node_count(), 10);
        assert_eq!(net.sink(), &id("s"));
        assert!(net.has_edge(&id("a"), &id("d")));
        assert!(!net.has_edge(&id("a"), &id("f")));
        assert_eq!(net.weight(&id("a")), 0.0);
    }

    #[test]
    fn parse_singleton() {
        let net = Network::parse("sink x\n").unwrap();
        assert_eq!(net.node_count(), 1);
        assert_eq!(net.compute_depths().depth(&id("x")), Some(0));
    }

    #[test]
    fn parse_rejects_self_loop() {
        let err = Network::parse("sink s\nedge a a\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_duplicate_edge_and_reversed_duplicate() {
        let err = Network::parse("sink s\nedge s a\nedge a s\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_unknown_directive() {
        let err = Network::parse("sink s\nnode a\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_missing_sink() {
        assert_eq!(Network::parse("edge a b\n"), Err(GraphError::MissingSink));
    }

    #[test]
    fn parse_rejects_unreachable_node() {
        let err = Network::parse("sink s\nedge s a\nedge b c\n").unwrap_err();
        assert!(matches!(err, GraphError::Unreachable { .. }), "{err}");
    }

    #[test]
    fn parse_rejects_negative_weight() {
        let err = Network::parse("sink s\nweight s -1\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn depths_match_worked_example() {
        let net = Network::parse(EXAMPLE_NETWORK).unwrap();
        let depths = net.compute_depths();
        for (node, want) in [
            ("s", 0),
            ("a", 1),
            ("b", 1),
            ("c", 1),
            ("d", 2),
            ("e", 2),
            ("f", 2),
            ("g", 2),
            ("h", 3),
            ("i", 3),
        ] {
            assert_eq!(depths.depth(&id(node)), Some(want), "depth({node})");
        }
    }

    #[test]
    fn depths_on_path() {
        let net = Network::parse("sink s\nedge s u\nedge u v\n").unwrap();
        let depths = net.compute_depths();
        assert_eq!(depths.depth(&id("u")), Some(1));
        assert_eq!(depths.depth(&id("v")), Some(2));
    }

    #[test]
    fn partition_matches_worked_example() {
        let net = Network::parse(EXAMPLE_NETWORK).unwrap();
        let partition = net.partition_diffusion_sets(&net.compute_depths());
        let want = vec![
            set(&["s"]),
            set(&["a", "b", "c"]),
            set(&["d", "e"]),
            set(&["f", "g"]),
            set(&["h"]),
            set(&["i"]),
        ];
        assert_eq!(partition.sets(), want.as_slice());
        assert_eq!(partition.set_of(&id("b")), Some(1));
        assert_eq!(partition.set_of(&id("i")), Some(5));
    }

    #[test]
    fn partition_star_gives_singletons() {
        // Leaves have no deeper neighbour, so no pair of them is related.
        let src = "sink s\nedge s l1\nedge s l2\nedge s l3\nedge s l4\nedge s l5\n";
        let net = Network::parse(src).unwrap();
        let partition = net.partition_diffusion_sets(&net.compute_depths());
        let want = vec![
            set(&["s"]),
            set(&["l1"]),
            set(&["l2"]),
            set(&["l3"]),
            set(&["l4"]),
            set(&["l5"]),
        ];
        assert_eq!(partition.sets(), want.as_slice());
    }

    #[test]
    fn partition_plain_grid_levels() {
        // 5x5 grid, sink at a corner: every anti-diagonal level collapses
        // into a single diffusion set, sizes 1,2,3,4,5,4,3,2,1. Checked
        // against the brute-force relation below.
        let mut edges = Vec::new();
        let name = |r: usize, c: usize| NodeId::new(format!("n{r}{c}"));
        for r in 0..5 {
            for c in 0..5 {
                if r + 1 < 5 {
                    edges.push((name(r, c), name(r + 1, c)));
                }
                if c + 1 < 5 {
                    edges.push((name(r, c), name(r, c + 1)));
                }
            }
        }
        let net = Network::new(name(0, 0), &edges, &[]).unwrap();
        let depths = net.compute_depths();
        let partition = net.partition_diffusion_sets(&depths);
        let sizes: Vec<usize> = partition.sets().iter().map(BTreeSet::len).collect();
        assert_eq!(sizes, vec![1, 2, 3, 4, 5, 4, 3, 2, 1]);
        assert_eq!(partition.sets(), brute_force_partition(&net).as_slice());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_node(3.0, 5.0, 9.0), Ok(EpidemicState::Susceptible));
        assert_eq!(classify_node(5.0, 5.0, 9.0), Ok(EpidemicState::Attacked));
        assert_eq!(classify_node(9.0, 5.0, 9.0), Ok(EpidemicState::Removed));
    }

    #[test]
    fn classify_rejects_bad_thresholds() {
        assert!(classify_node(1.0, 9.0, 5.0).is_err());
        assert!(classify_node(1.0, -1.0, 5.0).is_err());
        assert!(classify_node(f64::NAN, 1.0, 2.0).is_err());
    }

    #[test]
    fn interference_star_tree() {
        let mut src = String::from("sink s\n");
        let mut parents = BTreeMap::new();
        for k in 1..=9 {
            src.push_str(&format!("edge s c{k}\n"));
            parents.insert(NodeId::new(format!("c{k}")), id("s"));
        }
        let net = Network::parse(&src).unwrap();
        let counts = tree_interference(&net, &parents).unwrap();
        assert_eq!(counts[&id("s")], 9);
        assert!(counts
            .iter()
            .filter(|(n, _)| **n != id("s"))
            .all(|(_, c)| *c == 0));
    }

    #[test]
    fn interference_path_and_singleton() {
        let net = Network::parse("sink s\nedge s u\nedge u v\n").unwrap();
        let parents: BTreeMap<NodeId, NodeId> = [(id("u"), id("s")), (id("v"), id("u"))]
            .into_iter()
            .collect();
        let counts = tree_interference(&net, &parents).unwrap();
        assert_eq!(
            (counts[&id("s")], counts[&id("u")], counts[&id("v")]),
            (1, 1, 0)
        );

        let single = Network::parse("sink s\n").unwrap();
        let counts = tree_interference(&single, &BTreeMap::new()).unwrap();
        assert_eq!(counts[&id("s")], 0);
    }

    #[test]
    fn interference_rejects_bad_trees() {
        let net = Network::parse("sink s\nedge s u\nedge u v\nedge s v\n").unwrap();
        // missing parent for v
        let missing: BTreeMap<NodeId, NodeId> = [(id("u"), id("s"))].into_iter().collect();
        assert!(tree_interference(&net, &missing).is_err());
        // parent link that is not a network edge
        let net2 = Network::parse("sink s\nedge s u\nedge s v\n").unwrap();
        let bad_edge: BTreeMap<NodeId, NodeId> = [(id("u"), id("s")), (id("v"), id("u"))]
            .into_iter()
            .collect();
        assert!(tree_interference(&net2, &bad_edge).is_err());
        // cycle between u and v, never reaching the sink
        let cyc: BTreeMap<NodeId, NodeId> = [(id("u"), id("v")), (id("v"), id("u"))]
            .into_iter()
            .collect();
        let net3 = Network::parse("sink s\nedge s u\nedge u v\nedge s v\n").unwrap();
        assert!(tree_interference(&net3, &cyc).is_err());
        // sink with a parent
        let rooted: BTreeMap<NodeId, NodeId> = [(id("s"), id("u")), (id("u"), id("s"))]
            .into_iter()
            .collect();
        assert!(tree_interference(&net2, &rooted).is_err());
    }

    #[test]
    fn parse_tree_format() {
        let parents = parse_tree("# tree\nparent u s\nparent v u\n").unwrap();
        assert_eq!(parents[&id("u")], id("s"));
        assert!(parse_tree("parent u u\n").is_err());
        assert!(parse_tree("parent u s\nparent u s\n").is_err());
        assert!(parse_tree("child u s\n").is_err());
    }

    #[test]
    fn remove_node_keeps_reconnected_nodes() {
        let net = Network::parse(EXAMPLE_NETWORK).unwrap();
        let removal = net.remove_node(&id("d")).unwrap();
        let survived = &removal.network;
        assert!(!survived.contains(&id("d")));
        assert!(removal.orphaned.is_empty());
        // h stays connected through e
        assert!(survived.has_edge(&id("e"), &id("h")));
        assert!(!survived.has_edge(&id("a"), &id("d")));
        assert_eq!(survived.node_count(), 9);
        // re-partitioning the survivor still covers every node
        let partition = survived.partition_diffusion_sets(&survived.compute_depths());
        let covered: usize = partition.sets().iter().map(BTreeSet::len).sum();
        assert_eq!(covered, 9);
    }

    #[test]
    fn remove_node_drops_disconnected_tail() {
        let net = Network::parse("sink s\nedge s u\nedge u v\n").unwrap();
        let removal = net.remove_node(&id("u")).unwrap();
        assert_eq!(removal.orphaned, vec![id("v")]);
        assert_eq!(removal.network.node_count(), 1);
    }

    #[test]
    fn remove_node_rejects_sink_and_unknown() {
        let net = Network::parse("sink s\nedge s u\n").unwrap();
        assert_eq!(
            net.remove_node(&id("s")).unwrap_err(),
            GraphError::RemoveSink(id("s"))
        );
        assert!(matches!(
            net.remove_node(&id("zz")),
            Err(GraphError::UnknownNode(_))
        ));
    }

    /// Brute-force oracle: enumerate the shares-next-neighbour relation
    /// pairwise per depth level and take its connected components.
    pub(crate) fn brute_force_partition(net: &Network) -> Vec<BTreeSet<NodeId>> {
        let depths = net.compute_depths();
        let nodes: Vec<NodeId> = net.nodes().cloned().collect();
        let related = |x: &NodeId, y: &NodeId| -> bool {
            if depths.depth(x) != depths.depth(y) {
                return false;
            }
            let deeper = depths.depth(x).unwrap() + 1;
            net.neighbors(x)
                .any(|z| depths.depth(z) == Some(deeper) && net.has_edge(y, z))
        };

        let mut dsu = DisjointSets::new(nodes.len());
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if related(&nodes[i], &nodes[j]) {
                    dsu.union(i, j);
                }
            }
        }
        let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            groups.entry(dsu.find(i)).or_default().insert(node.clone());
        }
        let mut sets: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
        sets.sort_by_key(|s| {
            let first = s.first().unwrap().clone();
            (depths.depth(&first).unwrap(), first)
        });
        sets
    }

    /// Random connected graph: a random tree plus extra edges.
    pub(crate) fn random_connected(seed: u64, max_nodes: usize) -> Network {
        // splitmix64 keeps this reproducible without extra dependencies
        let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut next = move || {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        let n = 1 + (next() as usize) % max_nodes;
        let name = |k: usize| NodeId::new(format!("n{k:02}"));
        let mut edges = Vec::new();
        for k in 1..n {
            edges.push((name(k), name((next() as usize) % k)));
        }
        let extra = (next() as usize) % (n + 1);
        let mut seen: BTreeSet<(NodeId, NodeId)> = edges
            .iter()
            .map(|(u, v)| {
                if u < v {
                    (u.clone(), v.clone())
                } else {
                    (v.clone(), u.clone())
                }
            })
            .collect();
        for _ in 0..extra {
            let a = (next() as usize) % n;
            let b = (next() as usize) % n;
            if a == b {
                continue;
            }
            let (u, v) = (name(a.min(b)), name(a.max(b)));
            if seen.insert((u.clone(), v.clone())) {
                edges.push((u, v));
            }
        }
        Network::new(name(0), &edges, &[]).unwrap()
    }

    fn check_partition_properties(net: &Network) {
        let depths = net.compute_depths();
        let partition = net.partition_diffusion_sets(&depths);

        // cover + disjoint
        let mut seen = BTreeSet::new();
        for s in partition.sets() {
            assert!(!s.is_empty());
            for node in s {
                assert!(seen.insert(node.clone()), "node {node} in two sets");
            }
        }
        assert_eq!(seen.len(), net.node_count());

        // P1: equal depth within a set
        for s in partition.sets() {
            let d = depths.depth(s.first().unwrap());
            assert!(s.iter().all(|n| depths.depth(n) == d));
        }

        // P3 closure: sharing a next neighbour with a member pulls you in
        let nodes: Vec<NodeId> = net.nodes().cloned().collect();
        for x in &nodes {
            let dx = depths.depth(x).unwrap();
            for (pos, s) in partition.sets().iter().enumerate() {
                if depths.depth(s.first().unwrap()) != Some(dx) {
                    continue;
                }
                let shares = s.iter().any(|y| {
                    y != x
                        && net
                            .neighbors(x)
                            .any(|z| depths.depth(z) == Some(dx + 1) && net.has_edge(y, z))
                });
                if shares {
                    assert_eq!(partition.set_of(x), Some(pos));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_properties_random_graphs(seed in 0u64..300) {
            let net = random_connected(seed, 50);
            check_partition_properties(&net);
        }

        /// depth(sink) = 0 and every other node sits one hop above its
        /// shallowest neighbour.
        #[test]
        fn depths_satisfy_bfs_recurrence(seed in 0u64..300) {
            let net = random_connected(seed, 50);
            let depths = net.compute_depths();
            prop_assert_eq!(depths.depth(net.sink()), Some(0));
            for node in net.nodes() {
                if node == net.sink() {
                    continue;
                }
                let min_neighbor = net
                    .neighbors(node)
                    .filter_map(|n| depths.depth(n))
                    .min()
                    .expect("connected");
                prop_assert_eq!(depths.depth(node), Some(min_neighbor + 1));
            }
        }

        #[test]
        fn partition_equals_brute_force_small(seed in 0u64..300) {
            let net = random_connected(seed, 12);
            let partition = net.partition_diffusion_sets(&net.compute_depths());
            let expected = brute_force_partition(&net);
            prop_assert_eq!(partition.sets(), expected.as_slice());
        }

        #[test]
        fn classify_is_monotone(w1 in 0.0f64..100.0, w2 in 0.0f64..100.0,
                                t1 in 0.0f64..50.0, dt in 0.0f64..50.0) {
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            let a = classify_node(lo, t1, t1 + dt).unwrap();
            let b = classify_node(hi, t1, t1 + dt).unwrap();
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn partition_deterministic_across_edge_orderings() {
        let net = Network::parse(EXAMPLE_NETWORK).unwrap();
        let reference = net.partition_diffusion_sets(&net.compute_depths());

        // same edges, reversed declaration order and flipped endpoints
        let mut lines: Vec<&str> = EXAMPLE_NETWORK
            .lines()
            .filter(|l| l.starts_with("edge"))
            .collect();
        lines.reverse();
        let mut src = String::from("sink s\n");
        for l in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            src.push_str(&format!("edge {} {}\n", t[2], t[1]));
        }
        let permuted = Network::parse(&src).unwrap();
        let partition = permuted.partition_diffusion_sets(&permuted.compute_depths());
        assert_eq!(partition, reference);
    }
}
