use std::collections::{BTreeMap, BTreeSet};

use super::execute::{bound_arguments, needed_params, next_executable, plan_producers};
use super::{resolve_param, Action, DecisionContext, EpisodeState, Intent, IntentStatus, Result, RetrievalRequest};
use crate::graph::{NodeId, ToolGraph};
use crate::projection::{project, FeasibleSet, PolicyDistribution};

/// Maps a decision context to weighted candidate actions. The loop picks
/// the heaviest after optional feasibility projection.
pub trait DecisionPolicy {
    fn propose(&mut self, ctx: &DecisionContext, g: &ToolGraph) -> Result<Vec<(Action, f64)>>;
}

/// Indices of proposals that reference no pruned, unknown or failed API.
pub fn feasible_actions(proposals: &[(Action, f64)], g: &ToolGraph, state: &EpisodeState) -> Vec<usize> {
    proposals
        .iter()
        .enumerate()
        .filter(|(_, (a, _))| {
            a.referenced_apis()
                .into_iter()
                .all(|api| g.api(api.as_str()).is_some_and(|n| n.active) && !state.failed.contains(api))
        })
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn choose(
    proposals: Vec<(Action, f64)>,
    g: &ToolGraph,
    state: &EpisodeState,
    projection: bool,
) -> std::result::Result<Action, String> {
    if proposals.is_empty() {
        return Err("policy proposed no action".into());
    }
    let weights: Vec<f64> = proposals.iter().map(|(_, w)| *w).collect();
    let pi0 = PolicyDistribution::from_weights(&weights).map_err(|e| e.to_string())?;
    let pi = if projection {
        let feas = FeasibleSet::new(feasible_actions(&proposals, g, state)).map_err(|e| e.to_string())?;
        project(&pi0, &feas).map_err(|e| e.to_string())?
    } else {
        pi0
    };
    let best = pi.argmax();
    Ok(proposals.into_iter().nth(best).expect("argmax in range").0)
}

/// Deterministic policy: knowledge lookup, then parameter completion, then
/// toolchain retrieval and dependency-ordered execution, one intent at a time.
#[derive(Debug, Clone, Default)]
pub struct RulePolicy {
    pub knowledge: BTreeMap<String, String>,
}

impl RulePolicy {
    pub fn new(knowledge: BTreeMap<String, String>) -> Self {
        RulePolicy { knowledge }
    }

    /// Answer to the current intent. The last pending intent's answer is
    /// folded into the final synthesized response.
    fn answer(ctx: &DecisionContext, text: String) -> Vec<(Action, f64)> {
        let pending = ctx
            .state
            .intents
            .iter()
            .filter(|(_, s)| *s == IntentStatus::Pending)
            .count();
        let action = if pending <= 1 {
            let mut all: Vec<&str> = ctx.state.answers();
            all.push(&text);
            Action::DirectResponse {
                answer: all.join("; "),
                final_answer: true,
            }
        } else {
            Action::DirectResponse {
                answer: text,
                final_answer: false,
            }
        };
        vec![(action, 1.0)]
    }

    fn retrieval_for(g: &ToolGraph, state: &EpisodeState, param: &NodeId, fallback: &str) -> Action {
        let (name, desc) = match g.param(param.as_str()) {
            Some(p) => (p.canonical_name.clone(), p.description().to_owned()),
            None => (fallback.to_owned(), String::new()),
        };
        let known: BTreeSet<String> = state
            .bindings
            .keys()
            .filter_map(|id| g.param(id.as_str()))
            .map(|p| p.canonical_name.clone())
            .filter(|n| *n != name)
            .collect();
        let description = if desc.is_empty() { name.clone() } else { format!("{name} {desc}") };
        Action::ToolchainRetrieval(RetrievalRequest::new(description, known, [name].into()))
    }

    fn tool_step(
        &self,
        ctx: &DecisionContext,
        g: &ToolGraph,
        goal: &str,
        ask: &BTreeSet<String>,
    ) -> Vec<(Action, f64)> {
        let state = &ctx.state;
        let goal_id = resolve_param(g, goal);
        let bound = goal_id
            .as_ref()
            .and_then(|id| state.bindings.get(id))
            .or_else(|| state.loose.get(goal));
        if let Some(v) = bound {
            return Self::answer(ctx, format!("{goal}={v}"));
        }
        let open: Vec<&String> = ask.iter().filter(|n| !state.clarified.contains(*n)).collect();
        if !open.is_empty() {
            let names: Vec<&str> = open.iter().map(|s| s.as_str()).collect();
            return vec![(
                Action::IntentClarification {
                    question: format!("What is the value of {}?", names.join(", ")),
                },
                1.0,
            )];
        }
        let unable = || Self::answer(ctx, format!("unable to obtain {goal}"));
        let Some(goal_id) = goal_id else { return unable() };
        let Some(plan) = ctx.subgraph.as_ref().filter(|_| state.requested.contains(&goal_id)) else {
            return vec![(Self::retrieval_for(g, state, &goal_id, goal), 1.0)];
        };
        let ready = next_executable(g, plan, state, &goal_id);
        if !ready.is_empty() {
            return ready
                .into_iter()
                .enumerate()
                .map(|(rank, api)| {
                    let params = bound_arguments(g, state, &api);
                    (Action::ToolExecution { api, params }, 1.0 / (rank as f64 + 1.0))
                })
                .collect();
        }
        let missing = needed_params(g, plan, state, &goal_id)
            .into_iter()
            .find(|p| plan_producers(g, plan, state, p).is_empty() && !state.requested.contains(p));
        match missing {
            Some(p) => vec![(Self::retrieval_for(g, state, &p, p.as_str()), 1.0)],
            None => unable(),
        }
    }
}

impl DecisionPolicy for RulePolicy {
    fn propose(&mut self, ctx: &DecisionContext, g: &ToolGraph) -> Result<Vec<(Action, f64)>> {
        let Some((_, intent)) = ctx.state.current_intent() else {
            return Ok(vec![(
                Action::DirectResponse {
                    answer: ctx.state.answers().join("; "),
                    final_answer: true,
                },
                1.0,
            )]);
        };
        Ok(match intent {
            Intent::Knowledge { key } => {
                let value = self.knowledge.get(key).map_or("unknown", String::as_str);
                Self::answer(ctx, format!("{key}={value}"))
            }
            Intent::Tool { goal, ask, .. } => self.tool_step(ctx, g, goal, ask),
        })
    }
}
