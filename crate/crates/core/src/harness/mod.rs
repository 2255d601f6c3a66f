//! Deterministic tool simulator, judge, metrics and the churn experiment.

mod churn;
mod metrics;
mod world;

pub use churn::{run_churn_experiment, ArmReport, ChurnConfig, ChurnReport};
pub use metrics::{compute_metrics, read_outcomes, write_outcomes, DifficultyStats, MetricsReport, TaskOutcome};
pub use world::{ApiBehavior, Difficulty, FixtureWorld, Task};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::agent::{
    run_episode, AgentConfig, AgentError, DecisionPolicy, EpisodeEnv, EpisodeRecord, ExecutorResponse,
    ResponseKind, ToolExecutor, UserProxy,
};
use crate::graph::{NodeId, ToolGraph};
use crate::similarity::SimilarityProvider;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("no episodes to score")]
    NoRecords,
    #[error("the churn experiment needs at least 10 APIs, the world has {0}")]
    TooFewApis(usize),
    #[error("failure fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Evolution(#[from] crate::evolution::EvolutionError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Scoring(#[from] crate::scoring::ScoringError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Response of `api` to `args` in `phase`. A pure function of its inputs.
pub fn simulate_call(world: &FixtureWorld, api: &str, args: &BTreeMap<String, String>, phase: u32) -> ExecutorResponse {
    let Some(behavior) = world.apis.get(api) else {
        return ExecutorResponse::error(format!("unknown api {api}"));
    };
    if !world.is_available(api, phase) {
        return ExecutorResponse::error(format!("{api} is unavailable"));
    }
    match behavior.respond(args) {
        Ok(data) => ExecutorResponse {
            status: "ok".into(),
            data,
            kind: if behavior.mock { ResponseKind::Mock } else { ResponseKind::Success },
        },
        Err(missing) => ExecutorResponse::error(format!("missing input {missing}")),
    }
}

/// [`simulate_call`] bound to a world and phase.
pub struct Simulator<'a> {
    pub world: &'a FixtureWorld,
    pub phase: u32,
    pub calls: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(world: &'a FixtureWorld, phase: u32) -> Self {
        Simulator { world, phase, calls: 0 }
    }
}

impl ToolExecutor for Simulator<'_> {
    fn call(&mut self, api: &NodeId, params: &BTreeMap<String, String>) -> ExecutorResponse {
        self.calls += 1;
        simulate_call(self.world, api.as_str(), params, self.phase)
    }
}

/// Answers clarification requests from a task's held-back values.
pub struct SimulatedUser<'a> {
    pub values: &'a BTreeMap<String, String>,
}

impl UserProxy for SimulatedUser<'_> {
    fn clarify(&mut self, _: &str, wanted: &BTreeSet<String>) -> BTreeMap<String, String> {
        wanted
            .iter()
            .filter_map(|k| self.values.get(k).map(|v| (k.clone(), v.clone())))
            .collect()
    }
}

fn normalize_fact(f: &str) -> String {
    f.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Set equality of `;`-separated facts after whitespace and case
/// normalization.
pub fn judge(final_answer: &str, ground_truth: &str) -> bool {
    let facts = |s: &str| -> BTreeSet<String> {
        s.split(';').map(normalize_fact).filter(|f| !f.is_empty()).collect()
    };
    facts(final_answer) == facts(ground_truth)
}

/// Fixed inputs of [`run_task`].
pub struct TaskEnv<'a> {
    pub world: &'a FixtureWorld,
    pub graph: &'a ToolGraph,
    pub ranker: &'a dyn SimilarityProvider,
    pub config: &'a AgentConfig,
    pub phase: u32,
    pub start_time: u64,
}

/// Runs one task against the simulator and judges the final answer.
pub fn run_task(env: &TaskEnv<'_>, task: &Task, policy: &mut dyn DecisionPolicy) -> Result<(TaskOutcome, EpisodeRecord)> {
    let ep = EpisodeEnv {
        graph: env.graph,
        ranker: env.ranker,
        config: env.config,
        start_time: env.start_time,
    };
    let mut sim = Simulator::new(env.world, env.phase);
    let mut user = SimulatedUser {
        values: &task.user_values,
    };
    let rec = run_episode(&task.query, &ep, policy, &mut sim, &mut user)?;
    let success = rec.completed && rec.final_answer.as_deref().is_some_and(|a| judge(a, &task.ground_truth()));
    let outcome = TaskOutcome {
        task_id: task.id.clone(),
        difficulty: task.difficulty,
        phase: env.phase,
        completed: rec.completed,
        success,
        steps: rec.steps,
        final_answer: rec.final_answer.clone(),
    };
    Ok((outcome, rec))
}
