//! Graph maintenance under churn: recording invocations, pruning failing
//! APIs, probing pruned ones back, and blending recent success rates into
//! the statistical edge weights.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::IteratorRandom;
use rand::Rng;
use thiserror::Error;

use crate::graph::{
    integrate_api, statistical_weight, ApiSpec, GraphError, InvocationStats, NodeId, NodeKind, ToolGraph,
};
use crate::scoring::sigmoid;
use crate::similarity::SimilarityProvider;

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Stand-in for `1 / f_freq` when a node has no invocations in the window.
pub const INVERSE_FREQ_CAP: f64 = 20.0;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = EvolutionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub lambda: f64,
    pub prune_threshold: f64,
    pub reactivate_frac: f64,
    pub eta_prop: f64,
    pub tau_days: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            lambda: 0.8,
            prune_threshold: 0.7,
            reactivate_frac: 0.1,
            eta_prop: 0.5,
            tau_days: 7,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let bad = |m: &str| Err(EvolutionError::InvalidConfig(m.to_owned()));
        if !unit(self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !unit(self.reactivate_frac) {
            return bad("reactivate_frac must lie in [0, 1]");
        }
        if !unit(self.eta_prop) {
            return bad("eta_prop must lie in [0, 1]");
        }
        if !self.prune_threshold.is_finite() {
            return bad("prune_threshold must be finite");
        }
        if self.tau_days == 0 {
            return bad("tau_days must be positive");
        }
        Ok(())
    }

    /// Start of the sliding window ending at `now`.
    pub fn window_start(&self, now: u64) -> u64 {
        now.saturating_sub(self.tau_days * SECONDS_PER_DAY)
    }
}

impl FromStr for EvolutionConfig {
    type Err = EvolutionError;

    /// Flat `key = value` lines; `#` starts a comment. Missing keys keep
    /// their defaults.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = EvolutionConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| EvolutionError::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let real = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "lambda" => cfg.lambda = real()?,
                "prune_threshold" => cfg.prune_threshold = real()?,
                "reactivate_frac" => cfg.reactivate_frac = real()?,
                "eta_prop" => cfg.eta_prop = real()?,
                "tau_days" => cfg.tau_days = value.parse().map_err(|e| err(format!("{key}: {e}")))?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for EvolutionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda = {}", self.lambda)?;
        writeln!(f, "prune_threshold = {}", self.prune_threshold)?;
        writeln!(f, "reactivate_frac = {}", self.reactivate_frac)?;
        writeln!(f, "eta_prop = {}", self.eta_prop)?;
        writeln!(f, "tau_days = {}", self.tau_days)
    }
}

/// `λ·σ(f_fail) + (1−λ)·σ(1/f_freq)`, with `1/f_freq` capped for unused nodes.
pub fn prune_score(f_fail: f64, f_freq: f64, lambda: f64) -> f64 {
    let inv = if f_freq > 0.0 {
        1.0 / f_freq
    } else {
        INVERSE_FREQ_CAP
    };
    lambda * sigmoid(f_fail) + (1.0 - lambda) * sigmoid(inv)
}

/// Failure rate and invocations per day over the window ending at `now`.
pub fn window_rates(stats: &InvocationStats, cfg: &EvolutionConfig, now: u64) -> (f64, f64) {
    let events = stats.window(cfg.window_start(now));
    let events: Vec<_> = events.iter().filter(|e| e.at <= now).collect();
    if events.is_empty() {
        return (0.0, 0.0);
    }
    let fails = events.iter().filter(|e| !e.success).count();
    (
        fails as f64 / events.len() as f64,
        events.len() as f64 / cfg.tau_days as f64,
    )
}

pub fn node_prune_score(g: &ToolGraph, id: &str, cfg: &EvolutionConfig, now: u64) -> Option<f64> {
    let node = g.node(id)?;
    let (f_fail, f_freq) = window_rates(node.stats(), cfg, now);
    Some(prune_score(f_fail, f_freq, cfg.lambda))
}

/// Soft-deletes every active API whose prune score exceeds the threshold.
/// Returns the pruned ids in id order.
pub fn apply_pruning(g: &mut ToolGraph, cfg: &EvolutionConfig, now: u64) -> Result<Vec<NodeId>> {
    cfg.validate()?;
    let doomed: Vec<NodeId> = g
        .apis()
        .filter(|a| a.active)
        .filter(|a| {
            let (f_fail, f_freq) = window_rates(&a.stats, cfg, now);
            prune_score(f_fail, f_freq, cfg.lambda) > cfg.prune_threshold
        })
        .map(|a| a.id.clone())
        .collect();
    g.batch(|b| {
        for id in &doomed {
            b.set_active(id.as_str(), false)?;
        }
        Ok::<_, GraphError>(())
    })?;
    Ok(doomed)
}

/// Availability oracle used when probing pruned APIs.
pub trait Prober {
    fn probe(&self, api: &NodeId) -> bool;
}

impl<F: Fn(&NodeId) -> bool> Prober for F {
    fn probe(&self, api: &NodeId) -> bool {
        self(api)
    }
}

/// Probes `⌈frac · |pruned|⌉` randomly chosen pruned APIs and restores the
/// ones that respond, clearing their failure window. Returns the restored
/// ids in id order.
pub fn reactivate<R: Rng + ?Sized>(
    g: &mut ToolGraph,
    cfg: &EvolutionConfig,
    prober: &dyn Prober,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    cfg.validate()?;
    let pruned: Vec<NodeId> = g.apis().filter(|a| !a.active).map(|a| a.id.clone()).collect();
    let k = (cfg.reactivate_frac * pruned.len() as f64).ceil() as usize;
    let mut probed: Vec<NodeId> = pruned.into_iter().choose_multiple(rng, k);
    probed.sort();
    let restored: Vec<NodeId> = probed.into_iter().filter(|id| prober.probe(id)).collect();
    g.batch(|b| {
        for id in &restored {
            b.set_active(id.as_str(), true)?;
            b.stats_mut(id.as_str())?.clear_failures();
        }
        Ok::<_, GraphError>(())
    })?;
    Ok(restored)
}

/// `η·w_prev + (1−η)·(succ_uv / succ_v)`, with the recent ratio 0 when
/// `succ_v` is 0.
pub fn propagate_edge_weight(w_prev: f64, succ_uv: u64, succ_v: u64, eta: f64) -> f64 {
    let recent = if succ_v == 0 {
        0.0
    } else {
        succ_uv as f64 / succ_v as f64
    };
    eta * w_prev + (1.0 - eta) * recent
}

/// Applies [`propagate_edge_weight`] to every edge, counting successful
/// window events of the destination and those fed by the source.
pub fn propagate_weights(g: &mut ToolGraph, cfg: &EvolutionConfig, now: u64) -> Result<()> {
    cfg.validate()?;
    let since = cfg.window_start(now);
    let updates: Vec<(NodeId, NodeId, f64)> = g
        .edges()
        .map(|e| {
            let window = g.node(e.dst.as_str()).map_or(&[][..], |n| n.stats().window(since));
            let ok: Vec<_> = window.iter().filter(|ev| ev.success && ev.at <= now).collect();
            let via = ok.iter().filter(|ev| ev.peers.contains(&e.src)).count() as u64;
            let w = propagate_edge_weight(e.w_stat, via, ok.len() as u64, cfg.eta_prop);
            (e.src.clone(), e.dst.clone(), w.clamp(0.0, 1.0))
        })
        .collect();
    g.batch(|b| {
        for (s, d, w) in updates {
            b.set_w_stat(s.as_str(), d.as_str(), w)?;
        }
        Ok::<_, GraphError>(())
    })?;
    Ok(())
}

/// Adds a new API with zeroed statistics. Existing weights are untouched.
pub fn integrate_node(
    g: &mut ToolGraph,
    spec: &ApiSpec,
    sim: &dyn SimilarityProvider,
    threshold: f64,
) -> Result<()> {
    Ok(integrate_api(g, spec, sim, threshold)?)
}

/// One API call as observed by the executor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InvocationRecord {
    pub api: NodeId,
    pub at: u64,
    /// Parameter nodes bound as inputs.
    pub inputs: Vec<NodeId>,
    /// Parameter nodes produced on success.
    pub outputs: Vec<NodeId>,
    /// APIs whose earlier outputs fed this call.
    pub upstream: Vec<NodeId>,
    pub success: bool,
}

/// Records a batch of calls: node counters and windows, edge hit counts,
/// behavioral API edges on first successful co-invocation, and the
/// statistical weights of every edge touching an invoked node.
pub fn apply_invocations(g: &mut ToolGraph, records: &[InvocationRecord]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    g.batch(|b| {
        let mut touched: BTreeSet<NodeId> = BTreeSet::new();
        for r in records {
            let mut peers: Vec<NodeId> = r.inputs.iter().chain(&r.upstream).cloned().collect();
            peers.sort();
            peers.dedup();
            b.record(r.api.as_str(), r.at, peers, r.success)?;
            touched.insert(r.api.clone());
            if !r.success {
                continue;
            }
            for p in &r.inputs {
                if b.edge(p.as_str(), r.api.as_str()).is_some() {
                    b.add_hit(p.as_str(), r.api.as_str())?;
                }
            }
            for u in &r.upstream {
                if u != &r.api && b.kind_of(u.as_str()) == Some(NodeKind::Api) {
                    b.add_edge(u.as_str(), r.api.as_str())?;
                    b.add_hit(u.as_str(), r.api.as_str())?;
                }
            }
            for p in &r.outputs {
                b.record(p.as_str(), r.at, vec![r.api.clone()], true)?;
                touched.insert(p.clone());
                if b.edge(r.api.as_str(), p.as_str()).is_some() {
                    b.add_hit(r.api.as_str(), p.as_str())?;
                }
            }
        }
        let updates: Vec<(NodeId, NodeId, f64)> = touched
            .iter()
            .flat_map(|v| b.predecessors(v.as_str()))
            .map(|e| {
                let total = b.node(e.dst.as_str()).map_or(0, |n| n.stats().total());
                (e.src.clone(), e.dst.clone(), statistical_weight(e.hits, total))
            })
            .collect();
        for (s, d, w) in updates {
            b.set_w_stat(s.as_str(), d.as_str(), w)?;
        }
        Ok::<_, GraphError>(())
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ParamSpec};
    use crate::similarity::LexicalSimilarity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DAY: u64 = SECONDS_PER_DAY;

    fn spec(id: &str, i: &[&str], o: &[&str]) -> ApiSpec {
        ApiSpec {
            id: id.into(),
            name: id.into(),
            description: format!("{id} op"),
            inputs: i.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
            outputs: o.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
        }
    }

    #[test]
    fn prune_score_values() {
        assert_eq!(prune_score(0.0, 3.0, 1.0), 0.5);
        assert!((prune_score(1.0, 1.0, 0.5) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((prune_score(0.3, 0.0, 0.0) - 1.0).abs() < 1e-8);
        assert!(prune_score(1.0, 0.1, 0.5) > 0.7);
        assert!((prune_score(0.0, 1e9, 0.5) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips_through_text() {
        let cfg = EvolutionConfig {
            lambda: 0.25,
            prune_threshold: 0.65,
            reactivate_frac: 0.2,
            eta_prop: 0.9,
            tau_days: 3,
        };
        assert_eq!(cfg.to_string().parse::<EvolutionConfig>().unwrap(), cfg);
        let partial: EvolutionConfig = "# churn\nlambda = 0.5\n".parse().unwrap();
        assert_eq!(partial.lambda, 0.5);
        assert_eq!(partial.tau_days, 7);
        assert!("lamda = 1".parse::<EvolutionConfig>().is_err());
        assert!("lambda = 2".parse::<EvolutionConfig>().is_err());
        assert!("lambda 2".parse::<EvolutionConfig>().is_err());
    }

    #[test]
    fn failing_api_is_pruned_and_healthy_one_kept() {
        let mut g = build_graph(&[spec("bad", &[], &[]), spec("good", &[], &[])], &LexicalSimilarity, 0.8).unwrap();
        g.batch(|b| {
            for h in 0..3 {
                b.record("bad", h * 3600, vec![], false)?;
            }
            for h in 0..200 {
                b.record("good", h * 60, vec![], true)?;
            }
            Ok::<_, GraphError>(())
        })
        .unwrap();
        let cfg = EvolutionConfig {
            lambda: 0.5,
            ..EvolutionConfig::default()
        };
        let pruned = apply_pruning(&mut g, &cfg, DAY).unwrap();
        assert_eq!(pruned, vec![NodeId::from("bad")]);
        assert!(!g.is_active("bad") && g.is_active("good"));
        assert!(g.contains("bad"));
    }

    #[test]
    fn pruning_an_empty_graph_changes_nothing() {
        let mut g = ToolGraph::new();
        assert!(apply_pruning(&mut g, &EvolutionConfig::default(), 0).unwrap().is_empty());
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn unused_api_survives_default_lambda() {
        let mut g = build_graph(&[spec("idle", &[], &[])], &LexicalSimilarity, 0.8).unwrap();
        assert!(apply_pruning(&mut g, &EvolutionConfig::default(), 10 * DAY).unwrap().is_empty());
    }

    fn pruned_graph(n: usize) -> ToolGraph {
        let specs: Vec<ApiSpec> = (0..n).map(|i| spec(&format!("a{i:02}"), &[], &[])).collect();
        let mut g = build_graph(&specs, &LexicalSimilarity, 0.8).unwrap();
        g.batch(|b| {
            for s in &specs {
                b.set_active(&s.id, false)?;
                b.record(&s.id, 5, vec![], false)?;
            }
            Ok::<_, GraphError>(())
        })
        .unwrap();
        g
    }

    #[test]
    fn reactivation_probes_a_ceiling_fraction() {
        let mut g = pruned_graph(10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let restored = reactivate(&mut g, &EvolutionConfig::default(), &|_: &NodeId| true, &mut rng).unwrap();
        assert_eq!(restored.len(), 1);
        let id = &restored[0];
        assert!(g.is_active(id.as_str()));
        let stats = g.node(id.as_str()).unwrap().stats();
        assert_eq!(stats.n_fail, 1);
        assert!(stats.recent().is_empty());

        let mut empty = ToolGraph::new();
        assert!(reactivate(&mut empty, &EvolutionConfig::default(), &|_: &NodeId| true, &mut rng)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn reactivation_is_seed_deterministic() {
        let cfg = EvolutionConfig {
            reactivate_frac: 0.3,
            ..EvolutionConfig::default()
        };
        let run = |seed| {
            let mut g = pruned_graph(12);
            reactivate(&mut g, &cfg, &|id: &NodeId| id.as_str() != "a03", &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn propagation_values() {
        assert_eq!(propagate_edge_weight(0.3, 2, 5, 1.0), 0.3);
        assert!((propagate_edge_weight(0.8, 3, 4, 0.5) - 0.775).abs() < 1e-15);
        assert_eq!(propagate_edge_weight(0.8, 3, 4, 0.0), 0.75);
        assert_eq!(propagate_edge_weight(0.8, 0, 0, 0.5), 0.4);
    }

    #[test]
    fn invocations_drive_statistical_weights() {
        let mut g = build_graph(&[spec("src", &[], &["k"]), spec("dst", &["k"], &[])], &LexicalSimilarity, 0.8).unwrap();
        let call = |api: &str, at, ins: &[&str], outs: &[&str], up: &[&str], ok| InvocationRecord {
            api: api.into(),
            at,
            inputs: ins.iter().map(|s| NodeId::from(*s)).collect(),
            outputs: outs.iter().map(|s| NodeId::from(*s)).collect(),
            upstream: up.iter().map(|s| NodeId::from(*s)).collect(),
            success: ok,
        };
        apply_invocations(
            &mut g,
            &[
                call("src", 1, &[], &["param-k"], &[], true),
                call("dst", 2, &["param-k"], &[], &["src"], true),
                call("dst", 3, &["param-k"], &[], &["src"], false),
            ],
        )
        .unwrap();
        assert_eq!(g.edge("param-k", "dst").unwrap().w_stat, 0.5);
        assert_eq!(g.edge("src", "param-k").unwrap().w_stat, 1.0);
        let behavioral = g.edge("src", "dst").unwrap();
        assert_eq!((behavioral.hits, behavioral.w_stat), (1, 0.5));

        let cfg = EvolutionConfig::default();
        propagate_weights(&mut g, &cfg, 10).unwrap();
        // One successful window event at dst, fed by both param-k and src.
        assert_eq!(g.edge("param-k", "dst").unwrap().w_stat, 0.75);
        assert_eq!(g.edge("src", "dst").unwrap().w_stat, 0.75);
    }

    #[test]
    fn integration_keeps_existing_weights() {
        let mut g = build_graph(&[spec("a", &[], &["k"]), spec("b", &["k"], &[])], &LexicalSimilarity, 0.8).unwrap();
        g.batch(|b| b.set_w_stat("param-k", "b", 0.4)).unwrap();
        let before: Vec<_> = g.edges().cloned().collect();
        integrate_node(&mut g, &spec("c", &["k", "fresh"], &[]), &LexicalSimilarity, 0.8).unwrap();
        for e in before {
            assert_eq!(g.edge(e.src.as_str(), e.dst.as_str()), Some(&e));
        }
        assert!(g.param("param-fresh").is_some());
        assert_eq!(g.params().count(), 2);
        assert!(integrate_node(&mut g, &spec("c", &[], &[]), &LexicalSimilarity, 0.8).is_err());
    }
}
