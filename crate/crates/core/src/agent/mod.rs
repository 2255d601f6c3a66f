//! Four-action decision loop over a graph snapshot.
//!
//! Each step assembles a [`DecisionContext`] (the last three observation and
//! action pairs, the current observation and the working plan), asks a
//! [`DecisionPolicy`] for an action and carries it out: answering, asking the
//! user, retrieving a toolchain or calling an API. Failed calls can be
//! repaired in place by [`recombine`]. Invocation records are buffered in the
//! returned [`EpisodeRecord`] and applied to the graph by the caller.

mod execute;
mod external;
mod policy;
mod recombine;
mod retrieval;

pub use execute::{bound_arguments, execute_step, invoke, needed_params, next_executable, topological_order, StepOutcome};
pub use external::{parse_recall_description, ExternalPolicy, PolicyResponse, RecallDescription, RecallField};
pub use policy::{feasible_actions, DecisionPolicy, RulePolicy};
pub use recombine::{recombine, RecombineContext, Recombination, Strategy};
pub use retrieval::{api_text, rank_apis, retrieve_toolchain, Retrieval, RetrievalConfig, SearchMethod};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::InvocationRecord;
use crate::graph::{NodeId, ToolGraph};
use crate::plan::SubgraphPlan;
use crate::projection::ProjectionError;
use crate::search::SearchError;
use crate::similarity::SimilarityProvider;

/// Number of observation and action pairs kept in the context.
pub const HISTORY_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("policy protocol error: {0}")]
    Protocol(String),
    #[error("no candidate API matches the request")]
    EmptyPlan,
    #[error("no executable API in the plan")]
    Deadlock,
    #[error("no recombination strategy repairs the failure of {0}")]
    Exhausted(NodeId),
    #[error("max_steps must be at least 1")]
    NoSteps,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    UserQuery,
    ToolResult,
    ToolFailure,
    ClarificationReply,
    RetrievalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ObservationKind,
    pub payload: String,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalRequest {
    pub description: String,
    /// Filled by ranking; up to three targets, absent slots are `None`.
    pub top3_targets: [Option<NodeId>; 3],
    pub known_inputs: BTreeSet<String>,
    pub desired_outputs: BTreeSet<String>,
}

impl RetrievalRequest {
    pub fn new(description: impl Into<String>, known_inputs: BTreeSet<String>, desired_outputs: BTreeSet<String>) -> Self {
        RetrievalRequest {
            description: description.into(),
            top3_targets: [None, None, None],
            known_inputs,
            desired_outputs,
        }
    }

    pub fn targets(&self) -> impl Iterator<Item = &NodeId> {
        self.top3_targets.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// An answer to the current intent, or the final synthesized answer.
    DirectResponse { answer: String, final_answer: bool },
    IntentClarification { question: String },
    ToolchainRetrieval(RetrievalRequest),
    /// Parameters are keyed by the names the API declares.
    ToolExecution { api: NodeId, params: BTreeMap<String, String> },
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::DirectResponse { .. } => "direct_response",
            Action::IntentClarification { .. } => "intent_clarification",
            Action::ToolchainRetrieval(_) => "toolchain_retrieval",
            Action::ToolExecution { .. } => "tool_execution",
        }
    }

    /// APIs the action would touch.
    pub fn referenced_apis(&self) -> Vec<&NodeId> {
        match self {
            Action::ToolExecution { api, .. } => vec![api],
            Action::ToolchainRetrieval(r) => r.targets().collect(),
            _ => Vec::new(),
        }
    }
}

/// One unit of user intent. Compound queries arrive already split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intent {
    /// Answerable from the policy's own knowledge table.
    Knowledge { key: String },
    /// Needs the value of `goal`; `given` values are in the query, `ask`
    /// names are referenced but their values must be requested.
    Tool {
        goal: String,
        given: BTreeMap<String, String>,
        ask: BTreeSet<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub intents: Vec<Intent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentStatus {
    Pending,
    Answered(String),
}

/// Mutable per-episode state, visible to the policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub intents: Vec<(Intent, IntentStatus)>,
    /// Parameter node -> value.
    pub bindings: BTreeMap<NodeId, String>,
    /// Parameter node -> API that produced its value.
    pub produced_by: BTreeMap<NodeId, NodeId>,
    pub failed: BTreeSet<NodeId>,
    pub executed: BTreeSet<NodeId>,
    /// Parameter nodes a retrieval was already issued for.
    pub requested: BTreeSet<NodeId>,
    pub clarified: BTreeSet<String>,
    /// Bound values whose names match no parameter node.
    pub loose: BTreeMap<String, String>,
}

impl EpisodeState {
    pub fn current_intent(&self) -> Option<(usize, &Intent)> {
        self.intents
            .iter()
            .enumerate()
            .find(|(_, (_, s))| *s == IntentStatus::Pending)
            .map(|(i, (intent, _))| (i, intent))
    }

    pub fn answers(&self) -> Vec<&str> {
        self.intents
            .iter()
            .filter_map(|(_, s)| match s {
                IntentStatus::Answered(a) => Some(a.as_str()),
                IntentStatus::Pending => None,
            })
            .collect()
    }

    /// Binds a value given under a raw parameter name.
    pub fn bind_named(&mut self, g: &ToolGraph, name: &str, value: &str) {
        match resolve_param(g, name) {
            Some(id) => {
                self.bindings.insert(id, value.to_owned());
            }
            None => {
                self.loose.insert(name.to_owned(), value.to_owned());
            }
        }
    }
}

/// Parameter node for a raw or canonical name: canonical match first, then
/// the first node (by id) with a member of that name.
pub fn resolve_param(g: &ToolGraph, name: &str) -> Option<NodeId> {
    if let Some(p) = g.param_by_name(name) {
        return Some(p.id.clone());
    }
    g.params()
        .find(|p| p.members.iter().any(|m| m.original == name))
        .map(|p| p.id.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionContext {
    pub history: VecDeque<(Observation, Action)>,
    pub current: Observation,
    /// Sent to external policies as `tree` only.
    #[serde(skip)]
    pub subgraph: Option<SubgraphPlan>,
    pub tree: Option<String>,
    pub state: EpisodeState,
}

impl DecisionContext {
    /// Appends a pair and drops the oldest beyond the window.
    pub fn push(&mut self, obs: Observation, action: Action) {
        self.history.push_back((obs, action));
        while self.history.len() > HISTORY_WINDOW {
            self.history.pop_front();
        }
    }
}

/// Response shape of a tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorResponse {
    pub status: String,
    pub data: BTreeMap<String, String>,
    #[serde(rename = "type")]
    pub kind: ResponseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Success,
    Mock,
    Error,
}

impl ExecutorResponse {
    pub fn is_ok(&self) -> bool {
        self.kind != ResponseKind::Error
    }

    pub fn error(status: impl Into<String>) -> Self {
        ExecutorResponse {
            status: status.into(),
            data: BTreeMap::new(),
            kind: ResponseKind::Error,
        }
    }
}

pub trait ToolExecutor {
    fn call(&mut self, api: &NodeId, params: &BTreeMap<String, String>) -> ExecutorResponse;
}

/// Answers clarification questions on behalf of the user.
pub trait UserProxy {
    fn clarify(&mut self, question: &str, wanted: &BTreeSet<String>) -> BTreeMap<String, String>;
}

/// A user with nothing further to say.
#[derive(Debug, Clone, Copy, Default)]
pub struct SilentUser;

impl UserProxy for SilentUser {
    fn clarify(&mut self, _: &str, _: &BTreeSet<String>) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub retrieval: RetrievalConfig,
    pub max_steps: usize,
    /// Repair failed calls in place instead of leaving it to the policy.
    pub recombination: bool,
    /// Restrict policy proposals to feasible actions before choosing.
    pub projection: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            retrieval: RetrievalConfig::default(),
            max_steps: 12,
            recombination: true,
            projection: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeEnd {
    Answered,
    StepLimit,
    Exhausted,
    ProtocolError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub actions: Vec<Action>,
    pub observations: Vec<Observation>,
    /// Policy invocations.
    pub steps: usize,
    pub completed: bool,
    pub end: EpisodeEnd,
    pub final_answer: Option<String>,
    pub invocations: Vec<InvocationRecord>,
    pub recombinations: Vec<Strategy>,
    pub state: EpisodeState,
}

/// Everything an episode reads besides the policy and the environment.
pub struct EpisodeEnv<'a> {
    pub graph: &'a ToolGraph,
    pub ranker: &'a dyn SimilarityProvider,
    pub config: &'a AgentConfig,
    /// Timestamp of the first tool call; later calls add one second each.
    pub start_time: u64,
}

fn tool_payload(api: &NodeId, resp: &ExecutorResponse) -> String {
    let data: Vec<String> = resp.data.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{api}: {} {}", resp.status, data.join(", "))
}

/// Runs decide/act until a final answer, an unrecoverable failure or the
/// step limit.
pub fn run_episode(
    query: &Query,
    env: &EpisodeEnv<'_>,
    policy: &mut dyn DecisionPolicy,
    executor: &mut dyn ToolExecutor,
    user: &mut dyn UserProxy,
) -> Result<EpisodeRecord> {
    let cfg = env.config;
    let g = env.graph;
    if cfg.max_steps == 0 {
        return Err(AgentError::NoSteps);
    }
    let mut state = EpisodeState {
        intents: query.intents.iter().map(|i| (i.clone(), IntentStatus::Pending)).collect(),
        ..EpisodeState::default()
    };
    for intent in &query.intents {
        if let Intent::Tool { given, .. } = intent {
            for (k, v) in given {
                state.bind_named(g, k, v);
            }
        }
    }
    let mut ctx = DecisionContext {
        history: VecDeque::new(),
        current: Observation {
            kind: ObservationKind::UserQuery,
            payload: query.text.clone(),
            step_index: 0,
        },
        subgraph: None,
        tree: None,
        state,
    };
    let mut rec = EpisodeRecord {
        actions: Vec::new(),
        observations: vec![ctx.current.clone()],
        steps: 0,
        completed: false,
        end: EpisodeEnd::StepLimit,
        final_answer: None,
        invocations: Vec::new(),
        recombinations: Vec::new(),
        state: EpisodeState::default(),
    };
    let mut clock = env.start_time;

    while rec.steps < cfg.max_steps {
        rec.steps += 1;
        let proposals = match policy.propose(&ctx, g) {
            Ok(p) => p,
            Err(AgentError::Protocol(msg)) => {
                rec.end = EpisodeEnd::ProtocolError(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        let action = match policy::choose(proposals, g, &ctx.state, cfg.projection) {
            Ok(a) => a,
            Err(msg) => {
                rec.end = EpisodeEnd::ProtocolError(msg);
                break;
            }
        };
        rec.actions.push(action.clone());
        let step = rec.steps;
        let obs = match &action {
            Action::DirectResponse { answer, final_answer } => {
                if *final_answer {
                    rec.completed = true;
                    rec.end = EpisodeEnd::Answered;
                    rec.final_answer = Some(answer.clone());
                    break;
                }
                if let Some((i, _)) = ctx.state.current_intent() {
                    ctx.state.intents[i].1 = IntentStatus::Answered(answer.clone());
                }
                Observation {
                    kind: ObservationKind::UserQuery,
                    payload: query.text.clone(),
                    step_index: step,
                }
            }
            Action::IntentClarification { question } => {
                let wanted: BTreeSet<String> = match ctx.state.current_intent() {
                    Some((_, Intent::Tool { ask, .. })) => ask.difference(&ctx.state.clarified).cloned().collect(),
                    _ => BTreeSet::new(),
                };
                let reply = user.clarify(question, &wanted);
                ctx.state.clarified.extend(wanted);
                for (k, v) in &reply {
                    ctx.state.bind_named(g, k, v);
                    ctx.state.clarified.insert(k.clone());
                }
                let text: Vec<String> = reply.iter().map(|(k, v)| format!("{k}={v}")).collect();
                Observation {
                    kind: ObservationKind::ClarificationReply,
                    payload: text.join(", "),
                    step_index: step,
                }
            }
            Action::ToolchainRetrieval(req) => {
                for name in &req.desired_outputs {
                    if let Some(id) = resolve_param(g, name) {
                        ctx.state.requested.insert(id);
                    }
                }
                match retrieve_toolchain(req, g, env.ranker, &cfg.retrieval, &ctx.state.failed) {
                    Ok(found) => {
                        let merged = match ctx.subgraph.take() {
                            Some(old) => SubgraphPlan::merge(&[old, found.plan]),
                            None => found.plan,
                        };
                        let tree = crate::graph::serialize_subgraph(g, &merged).unwrap_or_default();
                        ctx.subgraph = Some(merged);
                        ctx.tree = Some(tree.clone());
                        Observation {
                            kind: ObservationKind::RetrievalResult,
                            payload: tree,
                            step_index: step,
                        }
                    }
                    Err(AgentError::EmptyPlan) => Observation {
                        kind: ObservationKind::RetrievalResult,
                        payload: String::new(),
                        step_index: step,
                    },
                    Err(e) => return Err(e),
                }
            }
            Action::ToolExecution { api, params } => {
                let at = clock;
                clock += 1;
                let outcome = invoke(g, &mut ctx.state, api, params, executor, at);
                rec.invocations.extend(outcome.record.clone());
                let mut obs = Observation {
                    kind: outcome.kind,
                    payload: tool_payload(api, &outcome.response),
                    step_index: step,
                };
                if outcome.record.as_ref().is_some_and(|r| !r.success) && cfg.recombination {
                    if let Some(plan) = ctx.subgraph.as_ref().filter(|p| p.contains(api.as_str())) {
                        let rc = RecombineContext {
                            graph: g,
                            state: &ctx.state,
                            retrieval: &cfg.retrieval,
                            ranker: env.ranker,
                        };
                        match recombine(plan, api, &rc) {
                            Ok(r) => {
                                rec.recombinations.push(r.strategy);
                                obs.payload.push_str(&format!(" | recombined by {}", r.strategy));
                                ctx.tree = crate::graph::serialize_subgraph(g, &r.plan).ok();
                                ctx.subgraph = Some(r.plan);
                            }
                            Err(_) => {
                                rec.observations.push(obs);
                                rec.end = EpisodeEnd::Exhausted;
                                break;
                            }
                        }
                    }
                }
                obs
            }
        };
        rec.observations.push(obs.clone());
        let prev = std::mem::replace(&mut ctx.current, obs);
        ctx.push(prev, action);
    }
    rec.state = ctx.state;
    Ok(rec)
}

#[cfg(test)]
mod tests;
