//! Heterogeneous tool dependency graph.
//!
//! Nodes are either APIs or standardized parameters. Structural edges follow
//! API schemas (`param -> api` for inputs, `api -> param` for outputs) and
//! behavioral edges connect nodes of the same kind when they are observed
//! together at runtime. Every edge carries a statistical weight derived from
//! invocation counts and a search weight consumed by the planners.
//!
//! Mutations happen through [`ToolGraph::batch`], which applies a closure to
//! a working copy and only swaps it in (with a bumped version) on success.

mod build;
mod io;
mod tree;

pub use build::{
    build_graph, default_canonical_name, integrate_api, ApiSpec, ParamSpec, DEFAULT_CLUSTER_THRESHOLD,
};
pub use io::{load_graph, parse_graph, render_graph, save_graph};
pub use tree::{parse_tree, serialize_subgraph, ParsedTree};

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, RwLock};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown dependency {src} -> {dst}")]
    UnknownEdge { src: NodeId, dst: NodeId },
    #[error("self-loop on `{0}`")]
    SelfLoop(NodeId),
    #[error("{kind} edge cannot connect `{src}` to `{dst}`")]
    InvalidEdgeKind { src: NodeId, dst: NodeId, kind: EdgeKind },
    #[error("weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("`{0}` has an empty description")]
    EmptyDescription(String),
    #[error("a parameter of `{0}` has an empty name")]
    EmptyParamName(NodeId),
    #[error("duplicate parameter `{name}` on `{api}`")]
    DuplicateParam { api: NodeId, name: String },
    #[error("invalid token `{0}`: ids and names must be non-empty and free of whitespace and `\"';:=,`")]
    InvalidToken(String),
    #[error("no API specs given")]
    NoApis,
    #[error("similarity threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("`{0}` is not an API node")]
    NotAnApi(NodeId),
    #[error("subgraph node `{0}` has no path to a target")]
    Disconnected(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Identifier shared by API and parameter nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
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

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
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

/// Ids, names and canonical parameter names are whitespace-free tokens so the
/// line-oriented file format stays unambiguous.
pub fn is_valid_token(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '"' | '\'' | ';' | ':' | '=' | ','))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Api,
    Param,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    /// Schema-derived `param -> api` or `api -> param`.
    Structural,
    /// Usage-derived `api -> api` or `param -> param`.
    Behavioral,
}

impl EdgeKind {
    /// The only kind allowed between nodes of the given kinds.
    pub fn between(src: NodeKind, dst: NodeKind) -> EdgeKind {
        if src == dst {
            EdgeKind::Behavioral
        } else {
            EdgeKind::Structural
        }
    }

    pub fn code(self) -> char {
        match self {
            EdgeKind::Structural => 'S',
            EdgeKind::Behavioral => 'B',
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::Structural => f.write_str("structural"),
            EdgeKind::Behavioral => f.write_str("behavioral"),
        }
    }
}

/// One invocation involving a node. `peers` are the nodes that fed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub at: u64,
    pub peers: Vec<NodeId>,
    pub success: bool,
}

/// Lifetime counters plus a time-ordered window of recent invocations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvocationStats {
    pub n_succ: u64,
    pub n_fail: u64,
    recent: Vec<Invocation>,
}

impl InvocationStats {
    pub fn total(&self) -> u64 {
        self.n_succ + self.n_fail
    }

    /// `n_succ / (n_succ + n_fail)`, zero without evidence.
    pub fn success_ratio(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.n_succ as f64 / n as f64,
        }
    }

    pub fn recent(&self) -> &[Invocation] {
        &self.recent
    }

    /// Events with `at >= since`.
    pub fn window(&self, since: u64) -> &[Invocation] {
        let start = self.recent.partition_point(|e| e.at < since);
        &self.recent[start..]
    }

    pub fn record(&mut self, at: u64, peers: Vec<NodeId>, success: bool) {
        if success {
            self.n_succ += 1;
        } else {
            self.n_fail += 1;
        }
        self.push_event(Invocation { at, peers, success });
    }

    /// Inserts an event without touching the lifetime counters.
    pub(crate) fn push_event(&mut self, event: Invocation) {
        let pos = self.recent.partition_point(|e| e.at <= event.at);
        self.recent.insert(pos, event);
    }

    /// Drops window events older than `since`.
    pub fn expire(&mut self, since: u64) {
        let start = self.recent.partition_point(|e| e.at < since);
        self.recent.drain(..start);
    }

    /// Removes failed events from the window; lifetime counters stay.
    pub fn clear_failures(&mut self) {
        self.recent.retain(|e| e.success);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiNode {
    pub id: NodeId,
    pub name: String,
    pub description: String,
    pub stats: InvocationStats,
    /// Pruned APIs stay in storage but are invisible to search.
    pub active: bool,
}

/// One raw parameter folded into a standardized parameter node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamMember {
    pub api: NodeId,
    pub original: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamNode {
    pub id: NodeId,
    pub canonical_name: String,
    pub members: Vec<ParamMember>,
    pub stats: InvocationStats,
}

impl ParamNode {
    pub fn description(&self) -> &str {
        self.members.first().map(|m| m.description.as_str()).unwrap_or("")
    }

    pub fn original_name_for(&self, api: &str) -> Option<&str> {
        self.members
            .iter()
            .find(|m| m.api.as_str() == api)
            .map(|m| m.original.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Api(ApiNode),
    Param(ParamNode),
}

impl Node {
    pub fn id(&self) -> &NodeId {
        match self {
            Node::Api(a) => &a.id,
            Node::Param(p) => &p.id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Api(_) => NodeKind::Api,
            Node::Param(_) => NodeKind::Param,
        }
    }

    pub fn stats(&self) -> &InvocationStats {
        match self {
            Node::Api(a) => &a.stats,
            Node::Param(p) => &p.stats,
        }
    }

    fn stats_mut(&mut self) -> &mut InvocationStats {
        match self {
            Node::Api(a) => &mut a.stats,
            Node::Param(p) => &mut p.stats,
        }
    }

    pub fn description(&self) -> &str {
        match self {
            Node::Api(a) => &a.description,
            Node::Param(p) => p.description(),
        }
    }

    /// Display name: API name or canonical parameter name.
    pub fn name(&self) -> &str {
        match self {
            Node::Api(a) => &a.name,
            Node::Param(p) => &p.canonical_name,
        }
    }

    pub fn is_active(&self) -> bool {
        match self {
            Node::Api(a) => a.active,
            Node::Param(_) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    /// Empirical weight `N(src -> dst) / N(dst)`.
    pub w_stat: f64,
    /// Weight consumed by search, set by an edge scorer.
    pub w_search: f64,
    /// Lifetime successful invocations flowing along this edge.
    pub hits: u64,
}

impl Edge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            src: self.src.clone(),
            dst: self.dst.clone(),
            kind: self.kind,
        }
    }
}

fn check_weight(w: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(GraphError::WeightOutOfRange(w))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToolGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeKey, Edge>,
    forward: BTreeMap<NodeId, BTreeSet<EdgeKey>>,
    reverse: BTreeMap<NodeId, BTreeSet<EdgeKey>>,
    version: u64,
}

impl ToolGraph {
    /// Empty graph at version 0.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn kind_of(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).map(Node::kind)
    }

    pub fn api(&self, id: &str) -> Option<&ApiNode> {
        match self.nodes.get(id) {
            Some(Node::Api(a)) => Some(a),
            _ => None,
        }
    }

    pub fn param(&self, id: &str) -> Option<&ParamNode> {
        match self.nodes.get(id) {
            Some(Node::Param(p)) => Some(p),
            _ => None,
        }
    }

    pub fn is_active(&self, id: &str) -> bool {
        self.nodes.get(id).is_some_and(Node::is_active)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn apis(&self) -> impl Iterator<Item = &ApiNode> {
        self.nodes.values().filter_map(|n| match n {
            Node::Api(a) => Some(a),
            _ => None,
        })
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamNode> {
        self.nodes.values().filter_map(|n| match n {
            Node::Param(p) => Some(p),
            _ => None,
        })
    }

    /// Parameter node with the given canonical name.
    pub fn param_by_name(&self, canonical: &str) -> Option<&ParamNode> {
        self.params().find(|p| p.canonical_name == canonical)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge_keys(&self) -> impl Iterator<Item = &EdgeKey> {
        self.edges.keys()
    }

    /// The edge `src -> dst`, whatever its kind (the kind is fixed by the
    /// node kinds, so there is at most one).
    pub fn edge(&self, src: &str, dst: &str) -> Option<&Edge> {
        let kind = EdgeKind::between(self.kind_of(src)?, self.kind_of(dst)?);
        self.edges.get(&EdgeKey {
            src: src.into(),
            dst: dst.into(),
            kind,
        })
    }

    pub fn edge_by_key(&self, key: &EdgeKey) -> Option<&Edge> {
        self.edges.get(key)
    }

    pub fn successors<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.forward
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(move |k| self.edges.get(k))
    }

    pub fn predecessors<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.reverse
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(move |k| self.edges.get(k))
    }

    pub fn in_degree(&self, id: &str) -> usize {
        self.reverse.get(id).map_or(0, BTreeSet::len)
    }

    pub fn out_degree(&self, id: &str) -> usize {
        self.forward.get(id).map_or(0, BTreeSet::len)
    }

    /// Input parameter nodes of an API, by id.
    pub fn inputs_of(&self, api: &str) -> Vec<NodeId> {
        self.predecessors(api)
            .filter(|e| e.kind == EdgeKind::Structural)
            .map(|e| e.src.clone())
            .collect()
    }

    /// Output parameter nodes of an API, by id.
    pub fn outputs_of(&self, api: &str) -> Vec<NodeId> {
        self.successors(api)
            .filter(|e| e.kind == EdgeKind::Structural)
            .map(|e| e.dst.clone())
            .collect()
    }

    /// APIs with an output edge into `param`.
    pub fn producers_of(&self, param: &str) -> Vec<NodeId> {
        self.predecessors(param)
            .filter(|e| e.kind == EdgeKind::Structural)
            .map(|e| e.src.clone())
            .collect()
    }

    /// Verifies every structural invariant. Used by tests and after loading.
    pub fn check_invariants(&self) -> Result<()> {
        let mut forward: BTreeMap<NodeId, BTreeSet<EdgeKey>> = BTreeMap::new();
        let mut reverse: BTreeMap<NodeId, BTreeSet<EdgeKey>> = BTreeMap::new();
        for (key, edge) in &self.edges {
            if *key != edge.key() {
                return Err(GraphError::Parse {
                    line: 0,
                    msg: format!("edge key mismatch for {} -> {}", edge.src, edge.dst),
                });
            }
            let sk = self
                .kind_of(edge.src.as_str())
                .ok_or_else(|| GraphError::UnknownNode(edge.src.clone()))?;
            let dk = self
                .kind_of(edge.dst.as_str())
                .ok_or_else(|| GraphError::UnknownNode(edge.dst.clone()))?;
            if edge.src == edge.dst {
                return Err(GraphError::SelfLoop(edge.src.clone()));
            }
            if EdgeKind::between(sk, dk) != edge.kind {
                return Err(GraphError::InvalidEdgeKind {
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                    kind: edge.kind,
                });
            }
            check_weight(edge.w_stat)?;
            check_weight(edge.w_search)?;
            forward.entry(edge.src.clone()).or_default().insert(key.clone());
            reverse.entry(edge.dst.clone()).or_default().insert(key.clone());
        }
        let strip = |m: &BTreeMap<NodeId, BTreeSet<EdgeKey>>| {
            m.iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(k, s)| (k.clone(), s.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        if strip(&self.forward) != forward || strip(&self.reverse) != reverse {
            return Err(GraphError::Parse {
                line: 0,
                msg: "adjacency index out of sync with edge set".into(),
            });
        }
        for node in self.nodes.values() {
            if node.description().trim().is_empty() {
                return Err(GraphError::EmptyDescription(node.id().to_string()));
            }
            if let Node::Param(p) = node {
                if p.members.is_empty() {
                    return Err(GraphError::Parse {
                        line: 0,
                        msg: format!("parameter node `{}` has no members", p.id),
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies `f` to a working copy as one atomic mutation batch. On success
    /// the copy replaces `self` with the version bumped by one; on error
    /// `self` is left untouched.
    pub fn batch<T, E, F>(&mut self, f: F) -> std::result::Result<T, E>
    where
        F: FnOnce(&mut Batch<'_>) -> std::result::Result<T, E>,
    {
        let mut work = self.clone();
        let out = f(&mut Batch { g: &mut work })?;
        work.version = self.version + 1;
        *self = work;
        Ok(out)
    }

    pub(crate) fn set_version(&mut self, version: u64) {
        self.version = version;
    }

    fn insert_node(&mut self, node: Node) -> Result<()> {
        let id = node.id().clone();
        if !is_valid_token(id.as_str()) {
            return Err(GraphError::InvalidToken(id.to_string()));
        }
        if self.nodes.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.nodes.insert(id, node);
        Ok(())
    }

    fn insert_edge(&mut self, edge: Edge) -> Result<bool> {
        if edge.src == edge.dst {
            return Err(GraphError::SelfLoop(edge.src));
        }
        let sk = self
            .kind_of(edge.src.as_str())
            .ok_or_else(|| GraphError::UnknownNode(edge.src.clone()))?;
        let dk = self
            .kind_of(edge.dst.as_str())
            .ok_or_else(|| GraphError::UnknownNode(edge.dst.clone()))?;
        if EdgeKind::between(sk, dk) != edge.kind {
            return Err(GraphError::InvalidEdgeKind {
                src: edge.src,
                dst: edge.dst,
                kind: edge.kind,
            });
        }
        check_weight(edge.w_stat)?;
        check_weight(edge.w_search)?;
        let key = edge.key();
        if self.edges.contains_key(&key) {
            return Ok(false);
        }
        self.forward.entry(edge.src.clone()).or_default().insert(key.clone());
        self.reverse.entry(edge.dst.clone()).or_default().insert(key.clone());
        self.edges.insert(key, edge);
        Ok(true)
    }

    fn edge_mut(&mut self, src: &str, dst: &str) -> Result<&mut Edge> {
        let missing = || GraphError::UnknownEdge {
            src: src.into(),
            dst: dst.into(),
        };
        let kind = EdgeKind::between(
            self.kind_of(src).ok_or_else(missing)?,
            self.kind_of(dst).ok_or_else(missing)?,
        );
        self.edges
            .get_mut(&EdgeKey {
                src: src.into(),
                dst: dst.into(),
                kind,
            })
            .ok_or_else(missing)
    }
}

/// Mutable view handed to [`ToolGraph::batch`] closures.
pub struct Batch<'a> {
    g: &'a mut ToolGraph,
}

impl Deref for Batch<'_> {
    type Target = ToolGraph;

    fn deref(&self) -> &ToolGraph {
        self.g
    }
}

impl Batch<'_> {
    pub fn add_node(&mut self, node: Node) -> Result<()> {
        if node.description().trim().is_empty() {
            return Err(GraphError::EmptyDescription(node.id().to_string()));
        }
        self.g.insert_node(node)
    }

    /// Adds `src -> dst` with zero weights; the kind follows from the node
    /// kinds. Returns `false` when the edge already exists.
    pub fn add_edge(&mut self, src: &str, dst: &str) -> Result<bool> {
        let sk = self
            .g
            .kind_of(src)
            .ok_or_else(|| GraphError::UnknownNode(src.into()))?;
        let dk = self
            .g
            .kind_of(dst)
            .ok_or_else(|| GraphError::UnknownNode(dst.into()))?;
        self.add_edge_of_kind(src, dst, EdgeKind::between(sk, dk))
    }

    pub fn add_edge_of_kind(&mut self, src: &str, dst: &str, kind: EdgeKind) -> Result<bool> {
        self.g.insert_edge(Edge {
            src: src.into(),
            dst: dst.into(),
            kind,
            w_stat: 0.0,
            w_search: 0.0,
            hits: 0,
        })
    }

    pub fn insert_edge(&mut self, edge: Edge) -> Result<bool> {
        self.g.insert_edge(edge)
    }

    pub fn set_w_stat(&mut self, src: &str, dst: &str, w: f64) -> Result<()> {
        let w = check_weight(w)?;
        self.g.edge_mut(src, dst)?.w_stat = w;
        Ok(())
    }

    pub fn set_w_search(&mut self, src: &str, dst: &str, w: f64) -> Result<()> {
        let w = check_weight(w)?;
        self.g.edge_mut(src, dst)?.w_search = w;
        Ok(())
    }

    pub fn add_hit(&mut self, src: &str, dst: &str) -> Result<()> {
        self.g.edge_mut(src, dst)?.hits += 1;
        Ok(())
    }

    pub fn record(&mut self, id: &str, at: u64, peers: Vec<NodeId>, success: bool) -> Result<()> {
        self.node_mut(id)?.stats_mut().record(at, peers, success);
        Ok(())
    }

    pub fn stats_mut(&mut self, id: &str) -> Result<&mut InvocationStats> {
        Ok(self.node_mut(id)?.stats_mut())
    }

    pub fn set_active(&mut self, api: &str, active: bool) -> Result<()> {
        match self.node_mut(api)? {
            Node::Api(a) => {
                a.active = active;
                Ok(())
            }
            Node::Param(_) => Err(GraphError::NotAnApi(api.into())),
        }
    }

    pub fn add_param_member(&mut self, param: &str, member: ParamMember) -> Result<()> {
        match self.node_mut(param)? {
            Node::Param(p) => {
                p.members.push(member);
                Ok(())
            }
            Node::Api(_) => Err(GraphError::UnknownNode(param.into())),
        }
    }

    fn node_mut(&mut self, id: &str) -> Result<&mut Node> {
        self.g
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.into()))
    }
}

/// Sets and returns `w_stat = N(src -> dst) / N(dst)` where `N(src -> dst)`
/// is the edge's successful-invocation count and `N(dst)` all invocations
/// involving `dst`. Zero when `dst` has never been invoked.
pub fn update_statistical_weight(g: &mut ToolGraph, src: &str, dst: &str) -> Result<f64> {
    g.batch(|b| {
        let edge = b.edge(src, dst).ok_or_else(|| GraphError::UnknownEdge {
            src: src.into(),
            dst: dst.into(),
        })?;
        let total = b.node(dst).map_or(0, |n| n.stats().total());
        let w = statistical_weight(edge.hits, total);
        b.set_w_stat(src, dst, w)?;
        Ok(w)
    })
}

/// `hits / total`, clamped to `[0, 1]`, with the `0/0` case defined as 0.
pub fn statistical_weight(hits: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        (hits as f64 / total as f64).min(1.0)
    }
}

/// Recomputes `w_stat` for every edge in one batch.
pub fn refresh_statistical_weights(g: &mut ToolGraph) -> Result<()> {
    g.batch(|b| {
        let updates: Vec<(NodeId, NodeId, f64)> = b
            .edges()
            .map(|e| {
                let total = b.node(e.dst.as_str()).map_or(0, |n| n.stats().total());
                (e.src.clone(), e.dst.clone(), statistical_weight(e.hits, total))
            })
            .collect();
        for (s, d, w) in updates {
            b.set_w_stat(s.as_str(), d.as_str(), w)?;
        }
        Ok(())
    })
}

/// Shared snapshot holder: readers clone an `Arc` of the current graph while
/// writers publish whole new versions.
#[derive(Debug, Default)]
pub struct GraphStore {
    current: RwLock<Arc<ToolGraph>>,
}

impl GraphStore {
    pub fn new(g: ToolGraph) -> Self {
        GraphStore {
            current: RwLock::new(Arc::new(g)),
        }
    }

    pub fn snapshot(&self) -> Arc<ToolGraph> {
        self.current.read().expect("graph store poisoned").clone()
    }

    /// Applies one mutation batch and publishes the result. Writers are
    /// serialized; readers holding older snapshots are unaffected.
    pub fn apply<T, E, F>(&self, f: F) -> std::result::Result<T, E>
    where
        F: FnOnce(&mut Batch<'_>) -> std::result::Result<T, E>,
    {
        let mut guard = self.current.write().expect("graph store poisoned");
        let mut next = ToolGraph::clone(&guard);
        let out = next.batch(f)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}
