//! Indented tree rendering of a subgraph plan.
//!
//! Each target is a root; the children of a node are its predecessors in the
//! plan (required parameters under an API, producer APIs under a parameter),
//! sorted by id. A node already expanded earlier is printed once more with a
//! `(ref)` marker and not expanded again, which both cuts cycles and keeps
//! shared producers from being repeated.
//!
//! ```text
//! api-record [api]
//!   param-data [param] w=0.750
//!     api-query [api] w=0.500
//!   param-user [param] w=0.000
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{EdgeKey, EdgeKind, GraphError, NodeId, NodeKind, Result, ToolGraph};
use crate::plan::SubgraphPlan;

const INDENT: &str = "  ";
const REF_MARK: &str = "(ref)";

fn tag(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Api => "[api]",
        NodeKind::Param => "[param]",
    }
}

pub fn serialize_subgraph(g: &ToolGraph, plan: &SubgraphPlan) -> Result<String> {
    for n in &plan.nodes {
        if !g.contains(n.as_str()) {
            return Err(GraphError::UnknownNode(n.clone()));
        }
    }
    let mut preds: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in &plan.edges {
        if !plan.nodes.contains(&e.src) {
            return Err(GraphError::UnknownNode(e.src.clone()));
        }
        if !plan.nodes.contains(&e.dst) {
            return Err(GraphError::UnknownNode(e.dst.clone()));
        }
        preds.entry(&e.dst).or_default().push(&e.src);
    }
    for list in preds.values_mut() {
        list.sort();
        list.dedup();
    }
    for t in &plan.targets {
        if !plan.nodes.contains(t) {
            return Err(GraphError::UnknownNode(t.clone()));
        }
    }
    let reach = plan.backward_depths();
    if let Some(orphan) = plan.nodes.iter().find(|n| !reach.contains_key(*n)) {
        return Err(GraphError::Disconnected(orphan.clone()));
    }

    let mut out = String::new();
    let mut expanded: BTreeSet<&NodeId> = BTreeSet::new();
    // Explicit stack of (node, parent, depth) keeps deep chains off the call stack.
    for root in &plan.targets {
        let mut stack: Vec<(&NodeId, Option<&NodeId>, usize)> = vec![(root, None, 0)];
        while let Some((node, parent, depth)) = stack.pop() {
            let kind = g.kind_of(node.as_str()).expect("checked above");
            for _ in 0..depth {
                out.push_str(INDENT);
            }
            let _ = write!(out, "{node} {}", tag(kind));
            if let Some(p) = parent {
                let w = g.edge(node.as_str(), p.as_str()).map_or(0.0, |e| e.w_search);
                let _ = write!(out, " w={w:.3}");
            }
            if !expanded.insert(node) {
                out.push(' ');
                out.push_str(REF_MARK);
                out.push('\n');
                continue;
            }
            out.push('\n');
            if let Some(children) = preds.get(node) {
                for child in children.iter().rev() {
                    stack.push((child, Some(node), depth + 1));
                }
            }
        }
    }
    Ok(out)
}

/// Node and edge sets recovered from a rendered tree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTree {
    pub roots: Vec<NodeId>,
    pub nodes: BTreeMap<NodeId, NodeKind>,
    pub edges: BTreeSet<EdgeKey>,
}

pub fn parse_tree(text: &str) -> Result<ParsedTree> {
    let mut tree = ParsedTree::default();
    // Ancestors on the current path: (node, kind, is_ref).
    let mut path: Vec<(NodeId, NodeKind, bool)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: &str| GraphError::Parse {
            line,
            msg: msg.to_owned(),
        };
        if raw.trim().is_empty() {
            continue;
        }
        let body = raw.trim_start_matches(' ');
        let spaces = raw.len() - body.len();
        if spaces % INDENT.len() != 0 {
            return Err(err("indentation is not a multiple of two spaces"));
        }
        let depth = spaces / INDENT.len();
        if depth > path.len() {
            return Err(err("indentation jumps more than one level"));
        }
        path.truncate(depth);
        let mut parts = body.split_whitespace();
        let id = NodeId::from(parts.next().ok_or_else(|| err("missing node id"))?);
        let kind = match parts.next() {
            Some("[api]") => NodeKind::Api,
            Some("[param]") => NodeKind::Param,
            _ => return Err(err("missing [api] or [param] tag")),
        };
        let is_ref = body.trim_end().ends_with(REF_MARK);
        if let Some(prev) = tree.nodes.insert(id.clone(), kind) {
            if prev != kind {
                return Err(err("node tagged with two different kinds"));
            }
        }
        match path.last() {
            None => tree.roots.push(id.clone()),
            Some((parent, pkind, parent_ref)) => {
                if *parent_ref {
                    return Err(err("a back-reference cannot have children"));
                }
                tree.edges.insert(EdgeKey {
                    src: id.clone(),
                    dst: parent.clone(),
                    kind: EdgeKind::between(kind, *pkind),
                });
            }
        }
        path.push((id, kind, is_ref));
    }
    Ok(tree)
}
