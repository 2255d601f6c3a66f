use std::collections::BTreeSet;

use toolnav_core::agent::{recombine, AgentError, EpisodeState, RecombineContext, Recombination, RetrievalConfig};
use toolnav_core::graph::{build_graph, render_graph, NodeId, ToolGraph};
use toolnav_core::harness::FixtureWorld;
use toolnav_core::plan::SubgraphPlan;
use toolnav_core::similarity::LexicalSimilarity;

pub struct Case {
    pub fixture: &'static str,
    /// APIs of the plan in use when `failed` broke; their parameters join too.
    pub plan_apis: &'static [&'static str],
    pub target: &'static str,
    /// Parameter names already bound, with the APIs that ran before the failure.
    pub bound: &'static [&'static str],
    pub executed: &'static [&'static str],
    pub failed: &'static str,
}

pub const SUBSTITUTION: Case = Case {
    fixture: "substitution.world",
    plan_apis: &["weather_now"],
    target: "weather_now",
    bound: &["city"],
    executed: &[],
    failed: "weather_now",
};

pub const REROUTING: Case = Case {
    fixture: "diamond.world",
    plan_apis: &["split_left", "via_left", "finish"],
    target: "finish",
    bound: &["seed", "left_key"],
    executed: &["split_left"],
    failed: "via_left",
};

pub const SWITCHING: Case = Case {
    fixture: "switching.world",
    plan_apis: &["fetch_answer"],
    target: "fetch_answer",
    bound: &["question"],
    executed: &[],
    failed: "fetch_answer",
};

pub const CUT_VERTEX: Case = Case {
    fixture: "cutvertex.world",
    plan_apis: &["lookup_code", "route_parcel"],
    target: "route_parcel",
    bound: &["address"],
    executed: &[],
    failed: "lookup_code",
};

pub fn world(name: &str) -> FixtureWorld {
    FixtureWorld::load(format!("{}/fixtures/recombine/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub struct Outcome {
    pub result: Result<Recombination, AgentError>,
    pub graph_unchanged: bool,
    pub failed: NodeId,
}

pub fn run_case(case: &Case) -> Outcome {
    let g: ToolGraph = build_graph(&world(case.fixture).specs(), &LexicalSimilarity, 0.8).unwrap();
    let mut nodes = BTreeSet::new();
    for a in case.plan_apis {
        nodes.insert(NodeId::new(*a));
        nodes.extend(g.inputs_of(a));
        nodes.extend(g.outputs_of(a));
    }
    let plan = SubgraphPlan::induced(&g, vec![NodeId::new(case.target)], &nodes);
    let mut state = EpisodeState::default();
    for name in case.bound {
        state.bind_named(&g, name, "v");
    }
    state.executed.extend(case.executed.iter().map(|a| NodeId::new(*a)));
    let failed = NodeId::new(case.failed);
    state.failed.insert(failed.clone());
    let before = render_graph(&g);
    let rc = RecombineContext {
        graph: &g,
        state: &state,
        retrieval: &RetrievalConfig::default(),
        ranker: &LexicalSimilarity,
    };
    let result = recombine(&plan, &failed, &rc);
    Outcome {
        result,
        graph_unchanged: render_graph(&g) == before,
        failed,
    }
}
