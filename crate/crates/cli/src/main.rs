use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use toolnav_core::agent::{AgentConfig, DecisionPolicy, ExternalPolicy, RulePolicy, SearchMethod};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toolnav_core::evolution::{
    apply_invocations, apply_pruning, propagate_weights, reactivate, EvolutionConfig, InvocationRecord,
};
use toolnav_core::graph::{build_graph, load_graph, save_graph, serialize_subgraph, NodeId, ToolGraph};
use toolnav_core::harness::{
    compute_metrics, read_outcomes, run_churn_experiment, run_task, write_outcomes, ChurnConfig, FixtureWorld, TaskEnv,
};
use toolnav_core::scoring::{score_edges, StatisticalScorer};
use toolnav_core::search::{alpha_beta_search_with, heuristic_search_with, SearchConfig};
use toolnav_core::similarity::LexicalSimilarity;

#[derive(Parser)]
#[command(name = "toolnav", version, about = "Tool dependency graphs, toolchain search and agent runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph construction.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Search a saved graph for a toolchain.
    Search(SearchArgs),
    /// Apply logged invocations, refresh weights and prune failing APIs.
    Evolve(EvolveArgs),
    /// Run every task of a world file and judge the answers.
    Run(RunArgs),
    /// Canned experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Summarize a records file.
    Metrics {
        #[arg(long)]
        records: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Build a graph from the API blocks of a world file.
    Build {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Similarity above which parameters are merged.
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ab,
    Heur,
}

#[derive(Args)]
struct SearchArgs {
    method: Method,
    #[arg(long)]
    graph: PathBuf,
    /// Target API. Comma-separate or repeat for several (heuristic only).
    #[arg(long = "targets", visible_alias = "target", value_delimiter = ',', required = true)]
    targets: Vec<String>,
    /// Parameter node the alpha-beta score also rewards.
    #[arg(long = "param")]
    target_param: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EvolveAction {
    /// Soft-delete APIs whose prune score exceeds the threshold.
    Prune,
    /// Probe a random share of pruned APIs and restore those that answer.
    Reactivate,
    /// Blend recent success ratios into the statistical edge weights.
    Propagate,
}

#[derive(Args)]
struct EvolveArgs {
    action: EvolveAction,
    #[arg(long)]
    graph: PathBuf,
    /// `key = value` evolution settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON lines of invocation records (as written by `run --invocations`),
    /// applied before the action.
    #[arg(long)]
    invocations: Option<PathBuf>,
    /// Clock in seconds; defaults to the latest recorded event.
    #[arg(long)]
    now: Option<u64>,
    /// World whose availability answers reactivation probes. Without one,
    /// every probed API answers.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    phase: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output graph; defaults to overwriting `--graph`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PolicyKind {
    Rule,
    External,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    world: PathBuf,
    /// Saved graph; built from the world when absent.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyKind::Rule)]
    policy: PolicyKind,
    /// Command that reads a decision context on stdin and prints an action.
    #[arg(long)]
    policy_cmd: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    max_steps: usize,
    #[arg(long, default_value = "heuristic")]
    search: SearchMethod,
    /// Availability phase of the world to simulate.
    #[arg(long, default_value_t = 0)]
    phase: u32,
    /// Where to write judged outcomes (JSON lines).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Where to write every API call (JSON lines).
    #[arg(long)]
    invocations: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Two-phase availability churn, mechanisms on against off.
    Churn {
        #[arg(long)]
        world: PathBuf,
        /// Saved graph; built from the world when absent.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        fail_frac: f64,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_world(path: &Path) -> Result<FixtureWorld> {
    let world = FixtureWorld::load(path).with_context(|| format!("reading {}", path.display()))?;
    world.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(world)
}

fn world_graph(world: &FixtureWorld, threshold: f64) -> Result<ToolGraph> {
    Ok(build_graph(&world.specs(), &LexicalSimilarity, threshold)?)
}

fn graph_or_world(path: Option<&Path>, world: &FixtureWorld) -> Result<ToolGraph> {
    match path {
        Some(p) => load_graph(p).with_context(|| format!("loading {}", p.display())),
        None => world_graph(world, 0.8),
    }
}

fn evolution_config(path: Option<&Path>) -> Result<EvolutionConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(text.parse()?)
        }
        None => Ok(EvolutionConfig::default()),
    }
}

fn search(args: SearchArgs) -> Result<()> {
    let g = load_graph(&args.graph).with_context(|| format!("loading {}", args.graph.display()))?;
    let cfg = SearchConfig::with_seed(args.seed);
    let none = Default::default();
    let plan = match args.method {
        Method::Ab => {
            if args.targets.len() != 1 {
                bail!("alpha-beta search takes exactly one --target");
            }
            alpha_beta_search_with(&g, &args.targets[0], args.target_param.as_deref(), &cfg, &none)?.0
        }
        Method::Heur => {
            let targets: Vec<NodeId> = args.targets.iter().map(NodeId::new).collect();
            heuristic_search_with(&g, &targets, &cfg, &none)?.merged
        }
    };
    print!("{}", serialize_subgraph(&g, &plan)?);
    println!("score={:.6} nodes={} edges={}", plan.score, plan.nodes.len(), plan.edges.len());
    Ok(())
}

fn evolve(args: EvolveArgs) -> Result<()> {
    let mut g = load_graph(&args.graph).with_context(|| format!("loading {}", args.graph.display()))?;
    let cfg = evolution_config(args.config.as_deref())?;
    let mut latest = 0;
    if let Some(path) = &args.invocations {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("invocation line {}", i + 1)))
            .collect::<Result<Vec<InvocationRecord>>>()?;
        latest = records.iter().map(|r| r.at).max().unwrap_or(0);
        apply_invocations(&mut g, &records)?;
        println!("applied {} invocations", records.len());
    }
    let latest = g
        .nodes()
        .flat_map(|n| n.stats().recent().iter().map(|e| e.at))
        .fold(latest, u64::max);
    let now = args.now.unwrap_or(latest);
    match args.action {
        EvolveAction::Prune => {
            for id in apply_pruning(&mut g, &cfg, now)? {
                println!("pruned {id}");
            }
        }
        EvolveAction::Reactivate => {
            let world = args.world.as_deref().map(load_world).transpose()?;
            let probe = |id: &NodeId| world.as_ref().is_none_or(|w| w.is_available(id.as_str(), args.phase));
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            for id in reactivate(&mut g, &cfg, &probe, &mut rng)? {
                println!("reactivated {id}");
            }
        }
        EvolveAction::Propagate => {
            propagate_weights(&mut g, &cfg, now)?;
            score_edges(&mut g, &StatisticalScorer)?;
            println!("propagated {} edge weights at t={now}", g.edge_count());
        }
    }
    save_graph(&g, args.out.as_ref().unwrap_or(&args.graph))?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let world = load_world(&args.world)?;
    let g = graph_or_world(args.graph.as_deref(), &world)?;
    let mut config = AgentConfig {
        max_steps: args.max_steps,
        ..AgentConfig::default()
    };
    config.retrieval.method = args.search;
    config.retrieval.search.rng_seed = args.seed;
    let mut policy: Box<dyn DecisionPolicy> = match args.policy {
        PolicyKind::Rule => Box::new(RulePolicy::new(world.knowledge.clone())),
        PolicyKind::External => {
            let cmd = args.policy_cmd.as_deref().context("--policy external needs --policy-cmd")?;
            Box::new(ExternalPolicy::from_command_line(cmd).context("empty --policy-cmd")?)
        }
    };
    let mut outcomes = Vec::new();
    let mut calls = Vec::new();
    for (i, task) in world.tasks.iter().enumerate() {
        let env = TaskEnv {
            world: &world,
            graph: &g,
            ranker: &LexicalSimilarity,
            config: &config,
            phase: args.phase,
            // One query per simulated hour, so the call log has distinct times.
            start_time: i as u64 * 3600,
        };
        let (outcome, rec) = run_task(&env, task, policy.as_mut()).with_context(|| format!("task {}", task.id))?;
        outcomes.push(outcome);
        calls.extend(rec.invocations);
    }
    if let Some(path) = &args.records {
        write_outcomes(BufWriter::new(File::create(path)?), &outcomes)?;
    }
    if let Some(path) = &args.invocations {
        let mut w = BufWriter::new(File::create(path)?);
        for c in &calls {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let report = compute_metrics(&outcomes)?;
    print!("{report}\n{}", report.key_values(""));
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Graph(GraphCmd::Build { world, out, threshold }) => {
            let world = FixtureWorld::load(&world).with_context(|| format!("reading {}", world.display()))?;
            let g = world_graph(&world, threshold)?;
            save_graph(&g, &out)?;
            println!("{} nodes, {} edges -> {}", g.node_count(), g.edge_count(), out.display());
        }
        Command::Search(args) => search(args)?,
        Command::Evolve(args) => evolve(args)?,
        Command::Run(args) => run(args)?,
        Command::Experiment(ExperimentCmd::Churn {
            world,
            graph,
            seed,
            fail_frac,
            max_steps,
            config,
        }) => {
            let world = load_world(&world)?;
            let g = graph_or_world(graph.as_deref(), &world)?;
            let mut cfg = ChurnConfig {
                fail_frac,
                seed,
                evolution: evolution_config(config.as_deref())?,
                ..ChurnConfig::default()
            };
            cfg.agent.max_steps = max_steps;
            print!("{}", run_churn_experiment(&world, &g, &cfg)?);
        }
        Command::Metrics { records } => {
            let file = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let report = compute_metrics(&read_outcomes(BufReader::new(file))?)?;
            print!("{report}\n{}", report.key_values(""));
        }
    }
    Ok(())
}
