use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::graph::{EdgeKey, NodeId, ToolGraph};

/// A pruned dependency subgraph rooted at one or more target APIs.
///
/// Every node has a directed path to some target inside the subgraph;
/// `depth_of` holds the hop distance to the nearest target.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphPlan {
    pub targets: Vec<NodeId>,
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<EdgeKey>,
    pub score: f64,
    pub depth_of: BTreeMap<NodeId, usize>,
}

impl SubgraphPlan {
    /// Plan over `nodes` with all graph edges induced between them. Nodes
    /// without a path to a target are dropped.
    pub fn induced(g: &ToolGraph, targets: Vec<NodeId>, nodes: &BTreeSet<NodeId>) -> SubgraphPlan {
        let edges: BTreeSet<EdgeKey> = g
            .edges()
            .filter(|e| nodes.contains(&e.src) && nodes.contains(&e.dst))
            .map(|e| e.key())
            .collect();
        let mut plan = SubgraphPlan {
            targets,
            nodes: nodes.clone(),
            edges,
            score: 0.0,
            depth_of: BTreeMap::new(),
        };
        plan.depth_of = plan.backward_depths();
        plan.nodes.retain(|n| plan.depth_of.contains_key(n));
        let keep = &plan.nodes;
        plan.edges.retain(|e| keep.contains(&e.src) && keep.contains(&e.dst));
        plan
    }

    pub fn target(&self) -> Option<&NodeId> {
        self.targets.first()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    /// Multi-source backward BFS from the targets over the plan's edges.
    pub fn backward_depths(&self) -> BTreeMap<NodeId, usize> {
        let mut preds: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for e in &self.edges {
            preds.entry(&e.dst).or_default().push(&e.src);
        }
        let mut depth = BTreeMap::new();
        let mut queue = VecDeque::new();
        for t in &self.targets {
            if self.nodes.contains(t) && !depth.contains_key(t) {
                depth.insert(t.clone(), 0);
                queue.push_back(t);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = depth[v];
            for &p in preds.get(v).into_iter().flatten() {
                if !depth.contains_key(p) {
                    depth.insert(p.clone(), d + 1);
                    queue.push_back(p);
                }
            }
        }
        depth
    }

    /// Union of several plans. Targets keep first-seen order; the score is
    /// the mean of the parts.
    pub fn merge(plans: &[SubgraphPlan]) -> SubgraphPlan {
        let mut targets: Vec<NodeId> = Vec::new();
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for p in plans {
            for t in &p.targets {
                if !targets.contains(t) {
                    targets.push(t.clone());
                }
            }
            nodes.extend(p.nodes.iter().cloned());
            edges.extend(p.edges.iter().cloned());
        }
        let score = if plans.is_empty() {
            0.0
        } else {
            plans.iter().map(|p| p.score).sum::<f64>() / plans.len() as f64
        };
        let mut merged = SubgraphPlan {
            targets,
            nodes,
            edges,
            score,
            depth_of: BTreeMap::new(),
        };
        merged.depth_of = merged.backward_depths();
        merged
    }

    /// Copy without `id` and anything that loses its path to a target.
    pub fn without(&self, id: &str) -> SubgraphPlan {
        let mut plan = self.clone();
        plan.targets.retain(|t| t.as_str() != id);
        plan.nodes.remove(id);
        plan.edges.retain(|e| e.src.as_str() != id && e.dst.as_str() != id);
        plan.depth_of = plan.backward_depths();
        plan.nodes.retain(|n| plan.depth_of.contains_key(n));
        let keep = &plan.nodes;
        plan.edges.retain(|e| keep.contains(&e.src) && keep.contains(&e.dst));
        plan
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeKind;

    fn key(s: &str, d: &str, kind: EdgeKind) -> EdgeKey {
        EdgeKey {
            src: s.into(),
            dst: d.into(),
            kind,
        }
    }

    #[test]
    fn merge_deduplicates_shared_nodes() {
        let a = SubgraphPlan {
            targets: vec!["t1".into()],
            nodes: ["t1", "p", "u"].into_iter().map(NodeId::from).collect(),
            edges: [key("p", "t1", EdgeKind::Structural), key("u", "p", EdgeKind::Structural)]
                .into_iter()
                .collect(),
            score: 0.5,
            depth_of: BTreeMap::new(),
        };
        let b = SubgraphPlan {
            targets: vec!["t2".into()],
            nodes: ["t2", "p", "u"].into_iter().map(NodeId::from).collect(),
            edges: [key("p", "t2", EdgeKind::Structural), key("u", "p", EdgeKind::Structural)]
                .into_iter()
                .collect(),
            score: 0.7,
            depth_of: BTreeMap::new(),
        };
        let m = SubgraphPlan::merge(&[a, b]);
        assert_eq!(m.nodes.len(), 4);
        assert_eq!(m.edges.len(), 3);
        assert_eq!(m.depth_of["u"], 2);
        assert!((m.score - 0.6).abs() < 1e-12);
        let cut = m.without("p");
        assert_eq!(cut.nodes.len(), 2);
        assert!(cut.edges.is_empty());
    }
}
