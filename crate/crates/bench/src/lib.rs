//! Synthetic graphs for the benchmarks in `benches/`.

use toolnav_core::graph::{build_graph, ApiSpec, GraphError, NodeId, ParamSpec, ToolGraph};
use toolnav_core::similarity::LexicalSimilarity;

/// A layered chain: API `i` reads fields `i`, `i+1` and writes field `i+2`,
/// so every API depends on the two before it. Search weights cycle through
/// a fixed pattern to keep runs reproducible.
pub fn chain_graph(apis: usize) -> ToolGraph {
    let field = |i: usize| ParamSpec::new(format!("field{i}"), format!("field {i} value"));
    let specs: Vec<ApiSpec> = (0..apis)
        .map(|i| ApiSpec {
            id: format!("api{i}"),
            name: format!("api{i}"),
            description: format!("step {i} of the chain"),
            inputs: vec![field(i), field(i + 1)],
            outputs: vec![field(i + 2)],
        })
        .collect();
    let mut g = build_graph(&specs, &LexicalSimilarity, 0.8).expect("chain specs are valid");
    let keys: Vec<_> = g.edge_keys().cloned().collect();
    g.batch(|b| {
        for (i, k) in keys.iter().enumerate() {
            b.set_w_search(k.src.as_str(), k.dst.as_str(), [0.2, 0.5, 0.8, 0.95][i % 4])?;
        }
        Ok::<_, GraphError>(())
    })
    .expect("weights are in range");
    g
}

pub fn last_api(g: &ToolGraph) -> NodeId {
    NodeId::new(format!("api{}", g.apis().count() - 1))
}
