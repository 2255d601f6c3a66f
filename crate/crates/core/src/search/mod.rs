//! Toolchain subgraph search over a graph snapshot.
//!
//! Three planners share one candidate model: the backward neighborhood of a
//! target API restricted to active, non-excluded nodes.
//! [`alpha_beta_search`] is a thresholded breadth-first walk,
//! [`heuristic_search`] evolves bit-vector chromosomes under a cooling
//! schedule, and [`exhaustive_search`] enumerates every connected subset as
//! a reference.

mod alpha_beta;
mod exhaustive;
mod fitness;
mod heuristic;
mod local;

pub use alpha_beta::{alpha_beta_search, alpha_beta_search_with, AlphaBetaTrace};
pub use exhaustive::{exhaustive_search, exhaustive_search_with, EXHAUSTIVE_LIMIT};
pub use fitness::{fitness, fitness_breakdown, FitnessBreakdown, FitnessWeights};
pub use heuristic::{
    cooling_schedule, heuristic_search, heuristic_search_with, mutation_intensity, HeuristicResult,
    HeuristicTrace,
};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeKind, ToolGraph};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("unknown target `{0}`")]
    UnknownTarget(NodeId),
    #[error("target `{0}` is not an API node")]
    NotAnApi(NodeId),
    #[error("target `{0}` is pruned or excluded")]
    UnavailableTarget(NodeId),
    #[error("`{0}` is not a parameter node")]
    NotAParam(NodeId),
    #[error("no targets given")]
    NoTargets,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("candidate neighborhood has {size} nodes, exhaustive search allows at most {limit}")]
    NeighborhoodTooLarge { size: usize, limit: usize },
    #[error("empty subgraph")]
    EmptySubgraph,
    #[error("edge {src} -> {dst} does not exist")]
    MissingEdge { src: NodeId, dst: NodeId },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = SearchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub alpha0: f64,
    pub beta0: f64,
    pub d_max_ab: usize,
    pub t0: f64,
    pub eta: f64,
    pub pop_size: usize,
    pub d_max_h: usize,
    pub max_gens: usize,
    pub elite_frac: f64,
    pub rng_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha0: 0.4,
            beta0: 0.9,
            d_max_ab: 5,
            t0: 200.0,
            eta: 0.7,
            pop_size: 20,
            d_max_h: 4,
            max_gens: 10,
            elite_frac: 0.6,
            rng_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig {
            rng_seed: seed,
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_owned()));
        if !(0.0 <= self.alpha0 && self.alpha0 < self.beta0 && self.beta0 <= 1.0) {
            return bad("need 0 <= alpha0 < beta0 <= 1");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return bad("elite_frac must lie in (0, 1]");
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return bad("T0 must be positive");
        }
        Ok(())
    }
}

/// `1 / (1 + √d)`.
pub fn depth_attenuation(d: usize) -> f64 {
    1.0 / (1.0 + (d as f64).sqrt())
}

/// `max(0.3, 0.5 · 0.9^d)`.
pub fn dynamic_threshold(d: usize) -> f64 {
    (0.5 * 0.9f64.powi(d as i32)).max(0.3)
}

/// Three-term average of search weights for the edge `u -> v`, attenuated by
/// depth. The second and third terms count only when `u` has an edge to the
/// target API or target parameter; when `v` is the target API the direct
/// edge therefore counts twice.
pub fn node_score(
    g: &ToolGraph,
    u: &str,
    v: &str,
    target_api: &str,
    target_param: Option<&str>,
    d: usize,
) -> Result<f64> {
    let direct = g.edge(u, v).ok_or_else(|| SearchError::MissingEdge {
        src: u.into(),
        dst: v.into(),
    })?;
    let to_api = g.edge(u, target_api).map_or(0.0, |e| e.w_search);
    let to_param = target_param
        .and_then(|p| g.edge(u, p))
        .map_or(0.0, |e| e.w_search);
    Ok((direct.w_search + to_api + to_param) / 3.0 * depth_attenuation(d))
}

fn usable(g: &ToolGraph, id: &str, exclude: &BTreeSet<NodeId>) -> bool {
    g.is_active(id) && !exclude.contains(id)
}

fn check_target(g: &ToolGraph, target: &str, exclude: &BTreeSet<NodeId>) -> Result<()> {
    match g.kind_of(target) {
        None => Err(SearchError::UnknownTarget(target.into())),
        Some(NodeKind::Param) => Err(SearchError::NotAnApi(target.into())),
        Some(NodeKind::Api) if !usable(g, target, exclude) => Err(SearchError::UnavailableTarget(target.into())),
        Some(NodeKind::Api) => Ok(()),
    }
}

/// Usable nodes within `d_max` backward hops of `target`, with their depth.
pub fn backward_neighborhood(
    g: &ToolGraph,
    target: &str,
    d_max: usize,
    exclude: &BTreeSet<NodeId>,
) -> BTreeMap<NodeId, usize> {
    let mut depth = BTreeMap::new();
    if !g.contains(target) {
        return depth;
    }
    let mut queue = VecDeque::from([NodeId::from(target)]);
    depth.insert(NodeId::from(target), 0);
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if d >= d_max {
            continue;
        }
        for e in g.predecessors(v.as_str()) {
            if !depth.contains_key(&e.src) && usable(g, e.src.as_str(), exclude) {
                depth.insert(e.src.clone(), d + 1);
                queue.push_back(e.src.clone());
            }
        }
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attenuation_and_threshold_values() {
        assert_eq!(depth_attenuation(0), 1.0);
        assert_eq!(depth_attenuation(1), 0.5);
        assert!((depth_attenuation(4) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dynamic_threshold(0), 0.5);
        assert_eq!(dynamic_threshold(5), 0.3);
        let mut prev = f64::INFINITY;
        for d in 0..40 {
            let h = dynamic_threshold(d);
            assert!(h <= prev && h >= 0.3);
            prev = h;
        }
    }

    #[test]
    fn default_config_is_valid() {
        let c = SearchConfig::default();
        c.validate().unwrap();
        assert_eq!((c.alpha0, c.beta0, c.t0, c.eta), (0.4, 0.9, 200.0, 0.7));
        assert_eq!((c.pop_size, c.d_max_h, c.d_max_ab, c.max_gens), (20, 4, 5, 10));
        let mut bad = c.clone();
        bad.alpha0 = 0.95;
        assert!(bad.validate().is_err());
        bad = c.clone();
        bad.pop_size = 1;
        assert!(bad.validate().is_err());
        bad = c;
        bad.eta = 1.0;
        assert!(bad.validate().is_err());
    }
}
