use std::collections::BTreeSet;
use std::fmt;

use super::retrieval::{retrieve_toolchain, RetrievalConfig};
use super::{AgentError, EpisodeState, Result, RetrievalRequest};
use crate::graph::{NodeId, ToolGraph};
use crate::plan::SubgraphPlan;
use crate::search::fitness;
use crate::similarity::SimilarityProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    Substitution,
    Rerouting,
    Switching,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Substitution => "substitution",
            Strategy::Rerouting => "rerouting",
            Strategy::Switching => "switching",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recombination {
    pub strategy: Strategy,
    pub plan: SubgraphPlan,
    /// APIs brought in to cover the failed one.
    pub added: Vec<NodeId>,
}

pub struct RecombineContext<'a> {
    pub graph: &'a ToolGraph,
    pub state: &'a EpisodeState,
    pub retrieval: &'a RetrievalConfig,
    pub ranker: &'a dyn SimilarityProvider,
}

impl RecombineContext<'_> {
    fn banned(&self, failed: &NodeId) -> BTreeSet<NodeId> {
        let mut b = self.state.failed.clone();
        b.insert(failed.clone());
        b
    }

    fn usable(&self, api: &NodeId, banned: &BTreeSet<NodeId>) -> bool {
        self.graph.is_active(api.as_str()) && !banned.contains(api)
    }

    fn bound(&self, p: &NodeId) -> bool {
        self.state.bindings.contains_key(p)
    }
}

/// Outputs of `failed` the plan consumes, or all of them when the plan
/// holds none.
fn required_outputs(g: &ToolGraph, plan: &SubgraphPlan, failed: &NodeId) -> BTreeSet<NodeId> {
    let outs: BTreeSet<NodeId> = g.outputs_of(failed.as_str()).into_iter().collect();
    let used: BTreeSet<NodeId> = outs.iter().filter(|o| plan.contains(o.as_str())).cloned().collect();
    if used.is_empty() {
        outs
    } else {
        used
    }
}

/// `plan` without the failed API, plus `added` and their inputs, with the
/// failed API's target slots handed to the additions.
fn rebuild(g: &ToolGraph, plan: &SubgraphPlan, failed: &NodeId, added: &[NodeId], banned: &BTreeSet<NodeId>) -> SubgraphPlan {
    let mut nodes: BTreeSet<NodeId> = plan.nodes.iter().filter(|n| !banned.contains(*n)).cloned().collect();
    for a in added {
        nodes.insert(a.clone());
        nodes.extend(g.inputs_of(a.as_str()));
    }
    let mut targets: Vec<NodeId> = Vec::new();
    for t in &plan.targets {
        let slot: Vec<NodeId> = if t == failed { added.to_vec() } else { vec![t.clone()] };
        for s in slot {
            if !banned.contains(&s) && !targets.contains(&s) {
                targets.push(s);
            }
        }
    }
    if targets.is_empty() {
        targets.extend(added.iter().cloned());
    }
    let mut out = SubgraphPlan::induced(g, targets.clone(), &nodes);
    let stranded: Vec<&NodeId> = added.iter().filter(|a| !out.contains(a.as_str())).collect();
    if !stranded.is_empty() {
        targets.extend(stranded.into_iter().cloned());
        out = SubgraphPlan::induced(g, targets, &nodes);
    }
    out.score = fitness(g, &out).unwrap_or(0.0);
    out
}

fn substitution(plan: &SubgraphPlan, failed: &NodeId, required: &BTreeSet<NodeId>, rc: &RecombineContext<'_>) -> Option<Recombination> {
    let g = rc.graph;
    let banned = rc.banned(failed);
    let bound_inputs: BTreeSet<NodeId> = g.inputs_of(failed.as_str()).into_iter().filter(|p| rc.bound(p)).collect();
    let sub = g.apis().map(|a| &a.id).find(|a| {
        rc.usable(a, &banned)
            && g.inputs_of(a.as_str()).iter().all(|i| bound_inputs.contains(i))
            && {
                let outs: BTreeSet<NodeId> = g.outputs_of(a.as_str()).into_iter().collect();
                required.is_subset(&outs)
            }
    })?;
    let added = vec![sub.clone()];
    Some(Recombination {
        strategy: Strategy::Substitution,
        plan: rebuild(g, plan, failed, &added, &banned),
        added,
    })
}

/// A producer of every required output whose unbound inputs each have a
/// usable producer with fully bound inputs.
fn rerouting(plan: &SubgraphPlan, failed: &NodeId, required: &BTreeSet<NodeId>, rc: &RecombineContext<'_>) -> Option<Recombination> {
    let g = rc.graph;
    let banned = rc.banned(failed);
    let ready = |a: &NodeId| rc.usable(a, &banned) && g.inputs_of(a.as_str()).iter().all(|i| rc.bound(i));
    for cand in g.apis().map(|a| &a.id) {
        if !rc.usable(cand, &banned) {
            continue;
        }
        let outs: BTreeSet<NodeId> = g.outputs_of(cand.as_str()).into_iter().collect();
        if !required.is_subset(&outs) {
            continue;
        }
        let mut added = vec![cand.clone()];
        let mut ok = true;
        for input in g.inputs_of(cand.as_str()) {
            if rc.bound(&input) {
                continue;
            }
            match g.producers_of(input.as_str()).into_iter().find(|u| u != cand && ready(u)) {
                Some(u) => added.push(u),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(Recombination {
                strategy: Strategy::Rerouting,
                plan: rebuild(g, plan, failed, &added, &banned),
                added,
            });
        }
    }
    None
}

fn switching(plan: &SubgraphPlan, failed: &NodeId, required: &BTreeSet<NodeId>, rc: &RecombineContext<'_>) -> Option<Recombination> {
    let g = rc.graph;
    let banned = rc.banned(failed);
    let names: Vec<&str> = required
        .iter()
        .filter_map(|p| g.param(p.as_str()))
        .map(|p| p.canonical_name.as_str())
        .collect();
    let descs: Vec<&str> = required.iter().filter_map(|p| g.param(p.as_str())).map(|p| p.description()).collect();
    let known = rc
        .state
        .bindings
        .keys()
        .filter_map(|id| g.param(id.as_str()))
        .map(|p| p.canonical_name.clone())
        .collect();
    let req = RetrievalRequest::new(
        format!("{} {}", names.join(" "), descs.join(" ")),
        known,
        names.iter().map(|s| s.to_string()).collect(),
    );
    let found = retrieve_toolchain(&req, g, rc.ranker, rc.retrieval, &banned).ok()?;
    let covers = required.iter().all(|o| {
        g.producers_of(o.as_str())
            .iter()
            .any(|p| found.plan.contains(p.as_str()) && !banned.contains(p))
    });
    if !covers {
        return None;
    }
    let kept = rebuild(g, plan, failed, &[], &banned);
    let mut merged = SubgraphPlan::merge(&[kept, found.plan]);
    merged.score = fitness(g, &merged).unwrap_or(0.0);
    Some(Recombination {
        strategy: Strategy::Switching,
        plan: merged,
        added: found.targets,
    })
}

/// Repairs `plan` after `failed` broke: I/O-equivalent substitution, then
/// one-level upstream rerouting, then a fresh retrieval that avoids every
/// failed API. The graph is read only.
pub fn recombine(plan: &SubgraphPlan, failed: &NodeId, rc: &RecombineContext<'_>) -> Result<Recombination> {
    let required = required_outputs(rc.graph, plan, failed);
    if required.is_empty() {
        return Err(AgentError::Exhausted(failed.clone()));
    }
    substitution(plan, failed, &required, rc)
        .or_else(|| rerouting(plan, failed, &required, rc))
        .or_else(|| switching(plan, failed, &required, rc))
        .filter(|r| !r.plan.contains(failed.as_str()))
        .ok_or_else(|| AgentError::Exhausted(failed.clone()))
}
