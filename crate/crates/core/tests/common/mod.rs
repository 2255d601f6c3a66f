#![allow(dead_code)]

pub mod recombine;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolnav_core::graph::{build_graph, ApiSpec, GraphError, NodeId, ParamSpec, ToolGraph};
use toolnav_core::similarity::LexicalSimilarity;

pub fn spec(id: &str, inputs: &[&str], outputs: &[&str]) -> ApiSpec {
    ApiSpec {
        id: id.into(),
        name: id.into(),
        description: format!("{id} operation"),
        inputs: inputs.iter().map(|n| ParamSpec::new(*n, format!("{n} value"))).collect(),
        outputs: outputs.iter().map(|n| ParamSpec::new(*n, format!("{n} value"))).collect(),
    }
}

/// Random schema graph with random search weights and a few behavioral edges.
pub fn random_graph(seed: u64, apis: usize, params: usize) -> ToolGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..params).map(|i| format!("f{i}")).collect();
    let specs: Vec<ApiSpec> = (0..apis)
        .map(|a| {
            let mut ins = Vec::new();
            let mut outs = Vec::new();
            for p in &pool {
                match rng.gen_range(0..6) {
                    0 => ins.push(p.as_str()),
                    1 => outs.push(p.as_str()),
                    _ => {}
                }
            }
            spec(&format!("api{a}"), &ins, &outs)
        })
        .collect();
    let mut g = build_graph(&specs, &LexicalSimilarity, 0.8).unwrap();
    let ids: Vec<NodeId> = g.node_ids().cloned().collect();
    let keys: Vec<_> = g.edge_keys().cloned().collect();
    g.batch(|b| {
        for _ in 0..rng.gen_range(0..3) {
            let s = &ids[rng.gen_range(0..ids.len())];
            let d = &ids[rng.gen_range(0..ids.len())];
            if s != d && b.kind_of(s.as_str()) == b.kind_of(d.as_str()) {
                b.add_edge(s.as_str(), d.as_str())?;
            }
        }
        for k in &keys {
            b.set_w_search(k.src.as_str(), k.dst.as_str(), (rng.gen_range(0..=100) as f64) / 100.0)?;
        }
        let extra: Vec<_> = b.edge_keys().filter(|k| !keys.contains(k)).cloned().collect();
        for k in extra {
            b.set_w_search(k.src.as_str(), k.dst.as_str(), (rng.gen_range(0..=100) as f64) / 100.0)?;
        }
        Ok::<_, GraphError>(())
    })
    .unwrap();
    g
}

/// Nodes within `hops` backward hops of `target`, walking active nodes only.
pub fn active_backward_reach(g: &ToolGraph, target: &str, hops: usize) -> std::collections::BTreeSet<NodeId> {
    let mut seen = std::collections::BTreeSet::from([NodeId::new(target)]);
    let mut frontier = vec![NodeId::new(target)];
    for _ in 0..hops {
        let mut next = Vec::new();
        for n in &frontier {
            for e in g.predecessors(n.as_str()) {
                if g.is_active(e.src.as_str()) && seen.insert(e.src.clone()) {
                    next.push(e.src.clone());
                }
            }
        }
        frontier = next;
    }
    seen
}

#[derive(Debug, Default)]
pub struct OracleStats {
    pub runs: usize,
    pub hits: usize,
    /// Heuristic runs that beat the exhaustive optimum, which must never happen.
    pub overshoots: Vec<u64>,
    /// Alpha-beta runs whose plan left the reachable set or dropped the target.
    pub ab_violations: Vec<u64>,
}

/// Heuristic vs exhaustive search on seeded graphs whose 4-hop candidate
/// neighborhood has 4 to 12 nodes, plus structural checks on alpha-beta.
pub fn search_oracle(runs: usize) -> OracleStats {
    use toolnav_core::search::{alpha_beta_search, backward_neighborhood, exhaustive_search, heuristic_search_with, SearchConfig};
    let none = std::collections::BTreeSet::new();
    let mut st = OracleStats::default();
    let mut seed = 0u64;
    while st.runs < runs {
        seed += 1;
        let g = random_graph(seed, 5, 6);
        let Some(t) = g.apis().map(|a| a.id.clone()).find(|t| {
            let n = backward_neighborhood(&g, t.as_str(), 4, &none).len();
            (4..=12).contains(&n)
        }) else {
            continue;
        };
        st.runs += 1;
        let ex = exhaustive_search(&g, t.as_str(), 4).unwrap();
        let h = heuristic_search_with(&g, std::slice::from_ref(&t), &SearchConfig::with_seed(seed), &none).unwrap();
        let hf = h.plans[0].score;
        if hf > ex.score + 1e-12 {
            st.overshoots.push(seed);
        }
        if (ex.score - hf).abs() <= 1e-9 {
            st.hits += 1;
        }
        let ab = alpha_beta_search(&g, t.as_str(), None, &SearchConfig::with_seed(seed)).unwrap();
        let reach = active_backward_reach(&g, t.as_str(), 5);
        if !ab.contains(t.as_str()) || !ab.nodes.is_subset(&reach) || ab.depth_of.values().any(|&d| d > 5) {
            st.ab_violations.push(seed);
        }
    }
    st
}
