use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{compute_metrics, run_task, FixtureWorld, HarnessError, MetricsReport, Result, TaskEnv, TaskOutcome};
use crate::agent::{AgentConfig, RulePolicy};
use crate::evolution::{apply_invocations, apply_pruning, propagate_weights, reactivate, EvolutionConfig, SECONDS_PER_DAY};
use crate::graph::{NodeId, ToolGraph};
use crate::scoring::{score_edges, StatisticalScorer};
use crate::similarity::LexicalSimilarity;

#[derive(Debug, Clone, PartialEq)]
pub struct ChurnConfig {
    /// Share of APIs made unavailable in phase 1, rounded up.
    pub fail_frac: f64,
    pub seed: u64,
    pub agent: AgentConfig,
    pub evolution: EvolutionConfig,
    /// Clock at the first query; each query advances it by `query_interval`.
    pub start_time: u64,
    pub query_interval: u64,
}

impl Default for ChurnConfig {
    fn default() -> Self {
        ChurnConfig {
            fail_frac: 0.1,
            seed: 0,
            agent: AgentConfig::default(),
            evolution: EvolutionConfig::default(),
            start_time: 30 * SECONDS_PER_DAY,
            query_interval: 3600,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmReport {
    pub phase1: MetricsReport,
    pub phase2: MetricsReport,
    pub overall: MetricsReport,
    pub outcomes: Vec<TaskOutcome>,
    /// Successful repairs by strategy name.
    pub recombinations: BTreeMap<String, usize>,
    pub prune_events: usize,
    pub reactivations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChurnReport {
    /// APIs down in phase 1.
    pub down: Vec<NodeId>,
    pub on: ArmReport,
    pub off: ArmReport,
}

impl fmt::Display for ChurnReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let down: Vec<&str> = self.down.iter().map(NodeId::as_str).collect();
        writeln!(f, "unavailable in phase 1: {}", down.join(", "))?;
        for (name, arm) in [("mechanisms on", &self.on), ("mechanisms off", &self.off)] {
            writeln!(f, "\n== {name} ==")?;
            writeln!(f, "-- phase 1 --\n{}", arm.phase1)?;
            writeln!(f, "-- phase 2 --\n{}", arm.phase2)?;
            writeln!(f, "-- both phases --\n{}", arm.overall)?;
        }
        writeln!(f)?;
        for (tag, arm) in [("on", &self.on), ("off", &self.off)] {
            write!(f, "{}", arm.overall.key_values(&format!("{tag}.")))?;
            write!(f, "{}", arm.phase1.key_values(&format!("{tag}.phase1.")))?;
            write!(f, "{}", arm.phase2.key_values(&format!("{tag}.phase2.")))?;
            writeln!(f, "{tag}.prune_events={}", arm.prune_events)?;
            writeln!(f, "{tag}.reactivations={}", arm.reactivations)?;
            for (s, n) in &arm.recombinations {
                writeln!(f, "{tag}.recombined.{s}={n}")?;
            }
        }
        Ok(())
    }
}

fn run_arm(world: &FixtureWorld, g0: &ToolGraph, down: &[NodeId], cfg: &ChurnConfig, mechanisms: bool) -> Result<ArmReport> {
    let mut phase_world = world.clone();
    for id in down {
        phase_world.availability.entry(id.to_string()).or_default().insert(1, false);
    }
    let agent = AgentConfig {
        recombination: mechanisms,
        ..cfg.agent.clone()
    };
    let mut g = g0.clone();
    let mut policy = RulePolicy::new(world.knowledge.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut now = cfg.start_time;
    let mut day = now / SECONDS_PER_DAY;
    let mut outcomes = Vec::new();
    let mut per_phase: [Vec<TaskOutcome>; 2] = Default::default();
    let mut recombinations = BTreeMap::new();
    let (mut prune_events, mut reactivations) = (0, 0);
    for phase in [1u32, 2] {
        for task in &world.tasks {
            now += cfg.query_interval;
            let env = TaskEnv {
                world: &phase_world,
                graph: &g,
                ranker: &LexicalSimilarity,
                config: &agent,
                phase,
                start_time: now,
            };
            let (outcome, rec) = run_task(&env, task, &mut policy)?;
            for s in &rec.recombinations {
                *recombinations.entry(s.to_string()).or_insert(0) += 1;
            }
            apply_invocations(&mut g, &rec.invocations)?;
            let end = now + rec.invocations.len() as u64;
            if end / SECONDS_PER_DAY != day {
                day = end / SECONDS_PER_DAY;
                propagate_weights(&mut g, &cfg.evolution, end)?;
            }
            if mechanisms {
                prune_events += apply_pruning(&mut g, &cfg.evolution, end)?.len();
                let probe = |id: &NodeId| phase_world.is_available(id.as_str(), phase);
                reactivations += reactivate(&mut g, &cfg.evolution, &probe, &mut rng)?.len();
            }
            score_edges(&mut g, &StatisticalScorer)?;
            per_phase[phase as usize - 1].push(outcome.clone());
            outcomes.push(outcome);
        }
    }
    Ok(ArmReport {
        phase1: compute_metrics(&per_phase[0])?,
        phase2: compute_metrics(&per_phase[1])?,
        overall: compute_metrics(&outcomes)?,
        outcomes,
        recombinations,
        prune_events,
        reactivations,
    })
}

/// Two-phase replay of the world's tasks. In phase 1 a seeded
/// `⌈fail_frac · n⌉` of the APIs is unavailable; in phase 2 they are back and
/// the same tasks run again on the carried-over graph. Both arms see the same
/// tasks in the same order; only the mechanisms-on arm prunes, reactivates
/// and repairs failed calls in place.
pub fn run_churn_experiment(world: &FixtureWorld, g: &ToolGraph, cfg: &ChurnConfig) -> Result<ChurnReport> {
    if world.apis.len() < 10 {
        return Err(HarnessError::TooFewApis(world.apis.len()));
    }
    if !(0.0..=1.0).contains(&cfg.fail_frac) {
        return Err(HarnessError::BadFraction(cfg.fail_frac));
    }
    cfg.evolution.validate()?;
    let k = (cfg.fail_frac * world.apis.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut down: Vec<NodeId> = world.apis.keys().map(|k| NodeId::new(k.clone())).choose_multiple(&mut rng, k);
    down.sort();
    Ok(ChurnReport {
        on: run_arm(world, g, &down, cfg, true)?,
        off: run_arm(world, g, &down, cfg, false)?,
        down,
    })
}
