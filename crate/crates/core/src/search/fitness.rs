use std::collections::VecDeque;

use super::local::Local;
use super::{Result, SearchError};
use crate::graph::{GraphError, ToolGraph};
use crate::plan::SubgraphPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessWeights {
    pub compactness: f64,
    pub param_density: f64,
    pub depth: f64,
    pub weight: f64,
    pub simplicity: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            compactness: 0.35,
            param_density: 0.15,
            depth: 0.3,
            weight: 0.15,
            simplicity: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessBreakdown {
    /// Mean closeness centrality of API nodes, undirected.
    pub c_c: f64,
    /// Share of parameter nodes.
    pub rho_p: f64,
    /// `0.2 e^{-d/10} + 0.8 e^{-n/8}`.
    pub d_c: f64,
    /// Mean search weight over edges, 0 when edgeless.
    pub w_n: f64,
    /// `1 / (1 + max(0, |E| - |V| + 1))`.
    pub c_p: f64,
    pub mean_depth: f64,
    pub total: f64,
}

pub(crate) fn breakdown_of(
    local: &Local,
    members: &[usize],
    edges: &[(usize, usize, f64)],
    depth: &[Option<usize>],
    w: &FitnessWeights,
) -> FitnessBreakdown {
    let n = members.len();
    let mut adj = vec![Vec::new(); local.len()];
    for &(s, d, _) in edges {
        adj[s].push(d);
        adj[d].push(s);
    }
    let mut closeness_sum = 0.0;
    let mut api_count = 0usize;
    let mut dist = vec![usize::MAX; local.len()];
    for &a in members.iter().filter(|&&i| local.is_api[i]) {
        api_count += 1;
        if n < 2 {
            continue;
        }
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        dist[a] = 0;
        let mut queue = VecDeque::from([a]);
        let mut total = 0usize;
        let mut reached = 0usize;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    total += dist[y];
                    reached += 1;
                    queue.push_back(y);
                }
            }
        }
        if total > 0 {
            // Scaled by the reachable share so disconnected pieces cannot look compact.
            closeness_sum += (reached as f64 / (n - 1) as f64) * (reached as f64 / total as f64);
        }
    }
    let c_c = if api_count == 0 {
        0.0
    } else {
        closeness_sum / api_count as f64
    };
    let params = members.iter().filter(|&&i| !local.is_api[i]).count();
    let rho_p = params as f64 / n as f64;
    let mean_depth = members.iter().map(|&i| depth[i].unwrap_or(0) as f64).sum::<f64>() / n as f64;
    let d_c = 0.2 * (-mean_depth / 10.0).exp() + 0.8 * (-(n as f64) / 8.0).exp();
    let w_n = if edges.is_empty() {
        0.0
    } else {
        edges.iter().map(|e| e.2).sum::<f64>() / edges.len() as f64
    };
    let cycles = (edges.len() + 1).saturating_sub(n);
    let c_p = 1.0 / (1.0 + cycles as f64);
    let total = w.compactness * c_c
        + w.param_density * (1.0 + rho_p).ln()
        + w.depth * d_c
        + w.weight * w_n
        + w.simplicity * c_p;
    FitnessBreakdown {
        c_c,
        rho_p,
        d_c,
        w_n,
        c_p,
        mean_depth,
        total,
    }
}

/// Components of the composite fitness of `plan` under search weights from `g`.
pub fn fitness_breakdown(g: &ToolGraph, plan: &SubgraphPlan, weights: &FitnessWeights) -> Result<FitnessBreakdown> {
    if plan.nodes.is_empty() {
        return Err(SearchError::EmptySubgraph);
    }
    for n in &plan.nodes {
        if !g.contains(n.as_str()) {
            return Err(GraphError::UnknownNode(n.clone()).into());
        }
    }
    let local = Local::new(g, &plan.nodes, &plan.targets, Some(&plan.edges));
    let mask = vec![true; local.len()];
    let depth = local.depths(&mask);
    if let Some(i) = depth.iter().position(Option::is_none) {
        return Err(GraphError::Disconnected(local.ids[i].clone()).into());
    }
    Ok(local.breakdown(&mask, weights))
}

pub fn fitness(g: &ToolGraph, plan: &SubgraphPlan) -> Result<f64> {
    Ok(fitness_breakdown(g, plan, &FitnessWeights::default())?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ApiSpec, NodeId, ParamSpec};
    use crate::similarity::LexicalSimilarity;
    use std::collections::BTreeSet;

    fn g() -> ToolGraph {
        let spec = |id: &str, i: &[&str], o: &[&str]| ApiSpec {
            id: id.into(),
            name: id.into(),
            description: format!("{id} op"),
            inputs: i.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
            outputs: o.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
        };
        build_graph(&[spec("up", &[], &["k"]), spec("t", &["k"], &[])], &LexicalSimilarity, 0.8).unwrap()
    }

    fn plan(g: &ToolGraph, nodes: &[&str]) -> SubgraphPlan {
        let set: BTreeSet<NodeId> = nodes.iter().map(|n| NodeId::from(*n)).collect();
        SubgraphPlan::induced(g, vec!["t".into()], &set)
    }

    #[test]
    fn single_node_value() {
        let g = g();
        let b = fitness_breakdown(&g, &plan(&g, &["t"]), &FitnessWeights::default()).unwrap();
        assert_eq!((b.c_c, b.rho_p, b.w_n, b.c_p), (0.0, 0.0, 0.0, 1.0));
        let expect = 0.3 * (0.2 + 0.8 * (-1.0f64 / 8.0).exp()) + 0.05;
        assert!((b.total - expect).abs() < 1e-15);
        assert!((b.total - 0.321_799_3).abs() < 1e-7);
    }

    #[test]
    fn chain_components() {
        let mut g = g();
        g.batch(|b| {
            b.set_w_search("param-k", "t", 0.8)?;
            b.set_w_search("up", "param-k", 0.4)
        })
        .unwrap();
        let b = fitness_breakdown(&g, &plan(&g, &["t", "param-k", "up"]), &FitnessWeights::default()).unwrap();
        // Path t - k - up: closeness of t is 2/3, of up is 2/3.
        assert!((b.c_c - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.rho_p - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.mean_depth - 1.0).abs() < 1e-15);
        assert!((b.w_n - 0.6).abs() < 1e-15);
        assert_eq!(b.c_p, 1.0);
        assert!(b.total > 0.0 && b.total <= 1.0);
    }

    #[test]
    fn extra_edge_lowers_simplicity() {
        let mut g = g();
        g.batch(|b| b.add_edge("up", "t").map(|_| ())).unwrap();
        let all = plan(&g, &["t", "param-k", "up"]);
        let mut tree = all.clone();
        tree.edges.retain(|e| !(e.src.as_str() == "up" && e.dst.as_str() == "t"));
        let w = FitnessWeights::default();
        let (a, b) = (
            fitness_breakdown(&g, &tree, &w).unwrap().c_p,
            fitness_breakdown(&g, &all, &w).unwrap().c_p,
        );
        assert!(b < a);
    }

    #[test]
    fn empty_plan_is_an_error() {
        let g = g();
        let mut p = plan(&g, &["t"]);
        p.nodes.clear();
        assert!(matches!(fitness(&g, &p), Err(SearchError::EmptySubgraph)));
    }
}
