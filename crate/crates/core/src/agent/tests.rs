use super::*;
use crate::graph::{build_graph, ApiSpec, ParamSpec};
use crate::similarity::LexicalSimilarity;

fn spec(id: &str, desc: &str, i: &[&str], o: &[&str]) -> ApiSpec {
    ApiSpec {
        id: id.into(),
        name: id.into(),
        description: desc.into(),
        inputs: i.iter().map(|n| ParamSpec::new(*n, format!("{n} value"))).collect(),
        outputs: o.iter().map(|n| ParamSpec::new(*n, format!("{n} value"))).collect(),
    }
}

fn chain() -> ToolGraph {
    build_graph(
        &[
            spec("make_token", "issue an access token", &["user"], &["token"]),
            spec("read_profile", "read the profile using a token", &["token"], &["profile"]),
            spec("clock", "current time", &[], &["now"]),
        ],
        &LexicalSimilarity,
        0.8,
    )
    .unwrap()
}

/// Echo executor that fails the listed APIs.
struct Echo {
    failing: Vec<&'static str>,
    calls: Vec<String>,
}

impl ToolExecutor for Echo {
    fn call(&mut self, api: &NodeId, params: &BTreeMap<String, String>) -> ExecutorResponse {
        self.calls.push(api.to_string());
        if self.failing.contains(&api.as_str()) {
            return ExecutorResponse::error("down");
        }
        let out = match api.as_str() {
            "make_token" => ("token", format!("tok-{}", params["user"])),
            "read_profile" => ("profile", format!("profile-{}", params["token"])),
            "clock" => ("now", "noon".to_owned()),
            other => (other, "x".to_owned()),
        };
        ExecutorResponse {
            status: "ok".into(),
            data: [(out.0.to_owned(), out.1)].into_iter().collect(),
            kind: ResponseKind::Success,
        }
    }
}

fn echo() -> Echo {
    Echo {
        failing: Vec::new(),
        calls: Vec::new(),
    }
}

fn whole(g: &ToolGraph, target: &str) -> SubgraphPlan {
    let nodes = g.node_ids().cloned().collect();
    SubgraphPlan::induced(g, vec![target.into()], &nodes)
}

#[test]
fn dependency_order_puts_producers_first() {
    let g = chain();
    let plan = whole(&g, "read_profile");
    let order = topological_order(&g, &plan);
    assert_eq!(order, [NodeId::from("make_token"), NodeId::from("read_profile")]);

    let mut state = EpisodeState::default();
    state.bind_named(&g, "user", "ann");
    let goal = NodeId::from("param-profile");
    let mut ex = echo();
    let first = execute_step(&g, &plan, &mut state, &goal, &mut ex, 0).unwrap();
    assert_eq!(first.kind, ObservationKind::ToolResult);
    let second = execute_step(&g, &plan, &mut state, &goal, &mut ex, 1).unwrap();
    assert_eq!(second.api.as_str(), "read_profile");
    assert_eq!(state.bindings[&goal], "profile-tok-ann");
    assert_eq!(ex.calls, ["make_token", "read_profile"]);
    assert!(matches!(
        execute_step(&g, &plan, &mut state, &goal, &mut ex, 2),
        Err(AgentError::Deadlock)
    ));
}

#[test]
fn no_input_api_is_ready_and_unbound_inputs_deadlock() {
    let g = chain();
    let plan = whole(&g, "clock");
    let state = EpisodeState::default();
    assert_eq!(next_executable(&g, &plan, &state, &"param-now".into()), [NodeId::from("clock")]);
    let plan = whole(&g, "read_profile");
    let mut state = EpisodeState::default();
    let mut ex = echo();
    assert!(matches!(
        execute_step(&g, &plan, &mut state, &"param-profile".into(), &mut ex, 0),
        Err(AgentError::Deadlock)
    ));
    assert!(ex.calls.is_empty());
}

#[test]
fn failed_call_is_reported_and_remembered() {
    let g = chain();
    let plan = whole(&g, "clock");
    let mut state = EpisodeState::default();
    let mut ex = Echo {
        failing: vec!["clock"],
        calls: Vec::new(),
    };
    let out = execute_step(&g, &plan, &mut state, &"param-now".into(), &mut ex, 0).unwrap();
    assert_eq!(out.kind, ObservationKind::ToolFailure);
    assert_eq!(out.api.as_str(), "clock");
    assert!(state.failed.contains("clock"));
    assert!(!out.record.unwrap().success);
    assert!(next_executable(&g, &plan, &state, &"param-now".into()).is_empty());
}

#[test]
fn unbound_inputs_never_reach_the_executor() {
    let g = chain();
    let mut state = EpisodeState::default();
    let mut ex = echo();
    let out = invoke(&g, &mut state, &"read_profile".into(), &BTreeMap::new(), &mut ex, 0);
    assert_eq!(out.kind, ObservationKind::ToolFailure);
    assert!(out.record.is_none());
    assert!(ex.calls.is_empty());
    assert!(state.failed.is_empty());
}

#[test]
fn ranking_and_retrieval() {
    let g = chain();
    let ranked = rank_apis(&g, &LexicalSimilarity, "read_profile", &BTreeSet::new());
    assert_eq!(ranked[0].0.as_str(), "read_profile");
    let empty = ToolGraph::new();
    let req = RetrievalRequest::new("anything", BTreeSet::new(), BTreeSet::new());
    assert!(matches!(
        retrieve_toolchain(&req, &empty, &LexicalSimilarity, &RetrievalConfig::default(), &BTreeSet::new()),
        Err(AgentError::EmptyPlan)
    ));
}

#[test]
fn merged_retrieval_holds_a_shared_producer_once() {
    let g = build_graph(
        &[
            spec("get_key", "issue key", &[], &["key"]),
            spec("open_door", "open door with key", &["key"], &["door"]),
            spec("open_safe", "open safe with key", &["key"], &["safe"]),
        ],
        &LexicalSimilarity,
        0.8,
    )
    .unwrap();
    let mut g = g;
    g.batch(|b| {
        b.set_w_search("param-key", "open_door", 1.0)?;
        b.set_w_search("param-key", "open_safe", 1.0)?;
        b.set_w_search("get_key", "param-key", 1.0)
    })
    .unwrap();
    let mut req = RetrievalRequest::new("open", BTreeSet::new(), BTreeSet::new());
    req.top3_targets = [Some("open_door".into()), Some("open_safe".into()), None];
    let cfg = RetrievalConfig {
        method: SearchMethod::AlphaBeta,
        ..RetrievalConfig::default()
    };
    let r = retrieve_toolchain(&req, &g, &LexicalSimilarity, &cfg, &BTreeSet::new()).unwrap();
    assert_eq!(r.targets.len(), 2);
    assert_eq!(r.plan.nodes.iter().filter(|n| n.as_str() == "param-key").count(), 1);
    assert!(r.plan.contains("open_door") && r.plan.contains("open_safe") && r.plan.contains("get_key"));
    assert_eq!(r.tree.matches("param-key").count(), 2, "{}", r.tree);
    assert!(r.tree.contains("(ref)"));
}

fn env<'a>(g: &'a ToolGraph, cfg: &'a AgentConfig) -> EpisodeEnv<'a> {
    EpisodeEnv {
        graph: g,
        ranker: &LexicalSimilarity,
        config: cfg,
        start_time: 0,
    }
}

fn tool_query(goal: &str, given: &[(&str, &str)], ask: &[&str]) -> Query {
    Query {
        text: format!("get {goal}"),
        intents: vec![Intent::Tool {
            goal: goal.into(),
            given: given.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ask: ask.iter().map(|s| s.to_string()).collect(),
        }],
    }
}

#[test]
fn knowledge_query_is_one_step() {
    let g = chain();
    let cfg = AgentConfig::default();
    let mut policy = RulePolicy::new([("sky".to_owned(), "blue".to_owned())].into());
    let q = Query {
        text: "what colour is the sky".into(),
        intents: vec![Intent::Knowledge { key: "sky".into() }],
    };
    let rec = run_episode(&q, &env(&g, &cfg), &mut policy, &mut echo(), &mut SilentUser).unwrap();
    assert!(rec.completed);
    assert_eq!(rec.final_answer.as_deref(), Some("sky=blue"));
    assert_eq!(rec.steps, 1);
}

#[test]
fn step_limit_leaves_the_episode_incomplete() {
    let g = chain();
    let cfg = AgentConfig {
        max_steps: 1,
        ..AgentConfig::default()
    };
    let q = tool_query("profile", &[("user", "ann")], &[]);
    let rec = run_episode(&q, &env(&g, &cfg), &mut RulePolicy::default(), &mut echo(), &mut SilentUser).unwrap();
    assert!(!rec.completed);
    assert_eq!(rec.steps, 1);
    assert_eq!(rec.end, EpisodeEnd::StepLimit);
    let zero = AgentConfig {
        max_steps: 0,
        ..AgentConfig::default()
    };
    assert!(matches!(
        run_episode(&q, &env(&g, &zero), &mut RulePolicy::default(), &mut echo(), &mut SilentUser),
        Err(AgentError::NoSteps)
    ));
}

struct Teller;

impl UserProxy for Teller {
    fn clarify(&mut self, _: &str, wanted: &BTreeSet<String>) -> BTreeMap<String, String> {
        wanted.iter().map(|k| (k.clone(), "bob".to_owned())).collect()
    }
}

#[test]
fn missing_value_triggers_clarification_then_tools() {
    let g = chain();
    let cfg = AgentConfig::default();
    let q = tool_query("profile", &[], &["user"]);
    let rec = run_episode(&q, &env(&g, &cfg), &mut RulePolicy::default(), &mut echo(), &mut Teller).unwrap();
    assert!(matches!(rec.actions[0], Action::IntentClarification { .. }));
    assert_eq!(rec.observations[1].kind, ObservationKind::ClarificationReply);
    assert_eq!(rec.final_answer.as_deref(), Some("profile=profile-tok-bob"));
    let steps: Vec<usize> = rec.observations.iter().map(|o| o.step_index).collect();
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    assert!(rec.steps <= cfg.max_steps);
}

/// Proposes a fixed list every time.
struct Scripted(Vec<(Action, f64)>);

impl DecisionPolicy for Scripted {
    fn propose(&mut self, _: &DecisionContext, _: &ToolGraph) -> Result<Vec<(Action, f64)>> {
        Ok(self.0.clone())
    }
}

#[test]
fn projection_drops_actions_on_failed_or_pruned_apis() {
    let mut g = chain();
    g.batch(|b| b.set_active("make_token", false)).unwrap();
    let state = EpisodeState::default();
    let call = |api: &str| Action::ToolExecution {
        api: api.into(),
        params: BTreeMap::new(),
    };
    let props = vec![(call("make_token"), 0.7), (call("clock"), 0.3)];
    assert_eq!(feasible_actions(&props, &g, &state), [1]);
    assert_eq!(policy::choose(props.clone(), &g, &state, true).unwrap(), call("clock"));
    assert_eq!(policy::choose(props.clone(), &g, &state, false).unwrap(), call("make_token"));
    let only_bad = vec![(call("make_token"), 1.0)];
    assert!(policy::choose(only_bad, &g, &state, true).is_err());

    let cfg = AgentConfig::default();
    let q = tool_query("now", &[], &[]);
    let mut pol = Scripted(vec![(call("make_token"), 1.0)]);
    let rec = run_episode(&q, &env(&g, &cfg), &mut pol, &mut echo(), &mut SilentUser).unwrap();
    assert!(matches!(rec.end, EpisodeEnd::ProtocolError(_)));
    assert!(!rec.completed);
}

#[test]
fn history_window_is_exact_fifo() {
    let obs = |i: usize| Observation {
        kind: ObservationKind::ToolResult,
        payload: i.to_string(),
        step_index: i,
    };
    let act = |i: usize| Action::IntentClarification { question: i.to_string() };
    let mut ctx = DecisionContext {
        history: VecDeque::new(),
        current: obs(0),
        subgraph: None,
        tree: None,
        state: EpisodeState::default(),
    };
    for k in 1..=7 {
        ctx.push(obs(k), act(k));
        let want: Vec<usize> = (k.saturating_sub(2).max(1)..=k).collect();
        let got: Vec<usize> = ctx.history.iter().map(|(o, _)| o.step_index).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn rule_policy_is_deterministic() {
    let g = chain();
    let mut state = EpisodeState {
        intents: vec![(
            Intent::Tool {
                goal: "profile".into(),
                given: BTreeMap::new(),
                ask: BTreeSet::new(),
            },
            IntentStatus::Pending,
        )],
        ..EpisodeState::default()
    };
    state.bind_named(&g, "user", "ann");
    state.requested.insert("param-profile".into());
    let ctx = DecisionContext {
        history: VecDeque::new(),
        current: Observation {
            kind: ObservationKind::UserQuery,
            payload: "q".into(),
            step_index: 0,
        },
        subgraph: Some(whole(&g, "read_profile")),
        tree: None,
        state,
    };
    let mut p = RulePolicy::default();
    let a = p.propose(&ctx, &g).unwrap();
    assert_eq!(a, p.propose(&ctx, &g).unwrap());
    assert!(matches!(&a[0].0, Action::ToolExecution { api, .. } if api.as_str() == "make_token"));
}

#[test]
fn context_serializes_for_external_policies() {
    let ctx = DecisionContext {
        history: VecDeque::new(),
        current: Observation {
            kind: ObservationKind::UserQuery,
            payload: "hello".into(),
            step_index: 0,
        },
        subgraph: None,
        tree: Some("t [api]".into()),
        state: EpisodeState::default(),
    };
    let json = serde_json::to_string(&ctx).unwrap();
    assert!(json.contains("\"user_query\""));
    let back: DecisionContext = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ctx);
}
