//! Index-based view of a candidate node set, shared by fitness evaluation
//! and the subset searches.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::fitness::{breakdown_of, FitnessBreakdown, FitnessWeights};
use crate::graph::{EdgeKey, NodeId, NodeKind, ToolGraph};
use crate::plan::SubgraphPlan;

pub(crate) struct Local {
    /// Sorted by id, so index order is id order.
    pub ids: Vec<NodeId>,
    pub is_api: Vec<bool>,
    /// `(src, dst, w_search)` in edge-key order.
    pub edges: Vec<(usize, usize, f64)>,
    pub preds: Vec<Vec<usize>>,
    pub targets: Vec<usize>,
}

impl Local {
    /// Induced structure over `nodes`. Edges outside `allowed` are dropped
    /// when a filter is given.
    pub fn new(
        g: &ToolGraph,
        nodes: &BTreeSet<NodeId>,
        targets: &[NodeId],
        allowed: Option<&BTreeSet<EdgeKey>>,
    ) -> Local {
        let ids: Vec<NodeId> = nodes.iter().cloned().collect();
        let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let is_api = ids
            .iter()
            .map(|n| g.kind_of(n.as_str()) == Some(NodeKind::Api))
            .collect();
        let mut edges = Vec::new();
        let mut preds = vec![Vec::new(); ids.len()];
        for (i, id) in ids.iter().enumerate() {
            for e in g.successors(id.as_str()) {
                let Some(&j) = index.get(&e.dst) else { continue };
                if allowed.is_some_and(|a| !a.contains(&e.key())) {
                    continue;
                }
                edges.push((i, j, e.w_search));
                preds[j].push(i);
            }
        }
        let targets = targets.iter().filter_map(|t| index.get(t).copied()).collect();
        Local {
            ids,
            is_api,
            edges,
            preds,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Backward hop distance to the nearest target, restricted to `mask`.
    pub fn depths(&self, mask: &[bool]) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for &t in &self.targets {
            if mask[t] && depth[t].is_none() {
                depth[t] = Some(0);
                queue.push_back(t);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = depth[v].expect("queued nodes have a depth");
            for &p in &self.preds[v] {
                if mask[p] && depth[p].is_none() {
                    depth[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        depth
    }

    /// Clears every bit without a path to a target and forces target bits.
    pub fn repair(&self, mask: &mut [bool]) {
        for &t in &self.targets {
            mask[t] = true;
        }
        let depth = self.depths(mask);
        for (bit, d) in mask.iter_mut().zip(&depth) {
            *bit = d.is_some();
        }
    }

    /// Components for a repaired mask.
    pub fn breakdown(&self, mask: &[bool], weights: &FitnessWeights) -> FitnessBreakdown {
        let depth = self.depths(mask);
        let members: Vec<usize> = (0..self.len()).filter(|&i| mask[i]).collect();
        let edges: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(s, d, _)| mask[s] && mask[d])
            .collect();
        breakdown_of(self, &members, &edges, &depth, weights)
    }

    pub fn plan(&self, g: &ToolGraph, mask: &[bool], score: f64) -> SubgraphPlan {
        let nodes: BTreeSet<NodeId> = (0..self.len()).filter(|&i| mask[i]).map(|i| self.ids[i].clone()).collect();
        let targets = self.targets.iter().map(|&t| self.ids[t].clone()).collect();
        let mut plan = SubgraphPlan::induced(g, targets, &nodes);
        plan.score = score;
        plan
    }

    pub fn members<'a>(&'a self, mask: &'a [bool]) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.ids.iter().zip(mask).filter(|(_, &b)| b).map(|(id, _)| id)
    }
}

/// True when the node list of `a` sorts before that of `b`.
pub(crate) fn lex_less(local: &Local, a: &[bool], b: &[bool]) -> bool {
    local.members(a).lt(local.members(b))
}
