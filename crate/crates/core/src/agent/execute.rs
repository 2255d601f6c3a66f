use std::collections::{BTreeMap, BTreeSet};

use super::{
    AgentError, EpisodeState, ExecutorResponse, ObservationKind, Result, ToolExecutor,
};
use crate::evolution::InvocationRecord;
use crate::graph::{NodeId, NodeKind, ToolGraph};
use crate::plan::SubgraphPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub api: NodeId,
    pub kind: ObservationKind,
    pub response: ExecutorResponse,
    /// Absent when the call was refused before reaching the executor.
    pub record: Option<InvocationRecord>,
}

/// APIs of the plan in dependency order: Kahn's algorithm over the full
/// schemas (`a` before `b` when an output of `a` is an input of `b`), smallest
/// id first among ready APIs. APIs caught in a cycle follow in id order.
pub fn topological_order(g: &ToolGraph, plan: &SubgraphPlan) -> Vec<NodeId> {
    let apis: Vec<&NodeId> = plan
        .nodes
        .iter()
        .filter(|n| g.kind_of(n.as_str()) == Some(NodeKind::Api))
        .collect();
    let mut deps: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
    for &b in &apis {
        let inputs: BTreeSet<NodeId> = g.inputs_of(b.as_str()).into_iter().collect();
        let d = apis
            .iter()
            .copied()
            .filter(|&a| a != b && g.outputs_of(a.as_str()).iter().any(|o| inputs.contains(o)))
            .collect();
        deps.insert(b, d);
    }
    let mut order = Vec::with_capacity(apis.len());
    let mut done: BTreeSet<&NodeId> = BTreeSet::new();
    while let Some(a) = deps
        .iter()
        .find(|(a, d)| !done.contains(*a) && d.iter().all(|x| done.contains(x)))
        .map(|(a, _)| *a)
    {
        done.insert(a);
        order.push(a.clone());
    }
    order.extend(apis.into_iter().filter(|a| !done.contains(a)).cloned());
    order
}

fn usable_api(g: &ToolGraph, state: &EpisodeState, api: &NodeId) -> bool {
    g.is_active(api.as_str()) && !state.failed.contains(api)
}

/// Usable plan APIs whose schema outputs include `param`.
pub(crate) fn plan_producers(g: &ToolGraph, plan: &SubgraphPlan, state: &EpisodeState, param: &NodeId) -> Vec<NodeId> {
    g.producers_of(param.as_str())
        .into_iter()
        .filter(|a| plan.contains(a.as_str()) && usable_api(g, state, a))
        .collect()
}

/// Unbound parameters the goal depends on: the goal itself plus, closing
/// backwards, the unbound inputs of every usable producer in the plan.
pub fn needed_params(g: &ToolGraph, plan: &SubgraphPlan, state: &EpisodeState, goal: &NodeId) -> BTreeSet<NodeId> {
    let mut needed = BTreeSet::new();
    if state.bindings.contains_key(goal) {
        return needed;
    }
    let mut stack = vec![goal.clone()];
    while let Some(p) = stack.pop() {
        if !needed.insert(p.clone()) {
            continue;
        }
        for api in plan_producers(g, plan, state, &p) {
            for input in g.inputs_of(api.as_str()) {
                if !state.bindings.contains_key(&input) && !needed.contains(&input) {
                    stack.push(input);
                }
            }
        }
    }
    needed
}

/// Usable plan APIs, in dependency order, whose inputs are all bound and
/// that produce at least one needed parameter.
pub fn next_executable(g: &ToolGraph, plan: &SubgraphPlan, state: &EpisodeState, goal: &NodeId) -> Vec<NodeId> {
    let needed = needed_params(g, plan, state, goal);
    topological_order(g, plan)
        .into_iter()
        .filter(|api| usable_api(g, state, api) && !state.executed.contains(api))
        .filter(|api| g.inputs_of(api.as_str()).iter().all(|i| state.bindings.contains_key(i)))
        .filter(|api| g.outputs_of(api.as_str()).iter().any(|o| needed.contains(o)))
        .collect()
}

/// Call arguments for `api` from the current bindings, keyed by the names
/// the API declares.
pub fn bound_arguments(g: &ToolGraph, state: &EpisodeState, api: &NodeId) -> BTreeMap<String, String> {
    let mut args = BTreeMap::new();
    for input in g.inputs_of(api.as_str()) {
        if let (Some(v), Some(p)) = (state.bindings.get(&input), g.param(input.as_str())) {
            let name = p.original_name_for(api.as_str()).unwrap_or(&p.canonical_name);
            args.insert(name.to_owned(), v.clone());
        }
    }
    args
}

/// Calls `api` once. Arguments missing from `params` are filled from the
/// bindings; if any declared input is still missing the executor is not
/// called. Outputs are bound on success; a failed API joins the failed set.
pub fn invoke(
    g: &ToolGraph,
    state: &mut EpisodeState,
    api: &NodeId,
    params: &BTreeMap<String, String>,
    executor: &mut dyn ToolExecutor,
    at: u64,
) -> StepOutcome {
    let mut args = bound_arguments(g, state, api);
    args.extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));
    let inputs = g.inputs_of(api.as_str());
    let missing: Vec<String> = inputs
        .iter()
        .filter_map(|i| g.param(i.as_str()))
        .map(|p| p.original_name_for(api.as_str()).unwrap_or(&p.canonical_name).to_owned())
        .filter(|name| !args.contains_key(name))
        .collect();
    if g.api(api.as_str()).is_none() || !missing.is_empty() {
        let status = if missing.is_empty() {
            format!("unknown api {api}")
        } else {
            format!("missing input {}", missing.join(", "))
        };
        return StepOutcome {
            api: api.clone(),
            kind: ObservationKind::ToolFailure,
            response: ExecutorResponse::error(status),
            record: None,
        };
    }
    let response = executor.call(api, &args);
    let mut upstream: Vec<NodeId> = inputs.iter().filter_map(|i| state.produced_by.get(i).cloned()).collect();
    upstream.sort();
    upstream.dedup();
    let mut outputs = Vec::new();
    let kind = if response.is_ok() {
        for out in g.outputs_of(api.as_str()) {
            let Some(p) = g.param(out.as_str()) else { continue };
            let name = p.original_name_for(api.as_str()).unwrap_or(&p.canonical_name);
            if let Some(v) = response.data.get(name) {
                state.bindings.insert(out.clone(), v.clone());
                state.produced_by.insert(out.clone(), api.clone());
                outputs.push(out);
            }
        }
        state.executed.insert(api.clone());
        ObservationKind::ToolResult
    } else {
        state.failed.insert(api.clone());
        // What the failed API was meant to produce may be looked up again.
        for out in g.outputs_of(api.as_str()) {
            state.requested.remove(&out);
        }
        ObservationKind::ToolFailure
    };
    let record = InvocationRecord {
        api: api.clone(),
        at,
        inputs,
        outputs,
        upstream,
        success: response.is_ok(),
    };
    StepOutcome {
        api: api.clone(),
        kind,
        response,
        record: Some(record),
    }
}

/// Invokes the first executable API of the plan toward `goal`.
pub fn execute_step(
    g: &ToolGraph,
    plan: &SubgraphPlan,
    state: &mut EpisodeState,
    goal: &NodeId,
    executor: &mut dyn ToolExecutor,
    at: u64,
) -> Result<StepOutcome> {
    let api = next_executable(g, plan, state, goal)
        .into_iter()
        .next()
        .ok_or(AgentError::Deadlock)?;
    Ok(invoke(g, state, &api, &BTreeMap::new(), executor, at))
}
