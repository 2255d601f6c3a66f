use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{check_target, dynamic_threshold, fitness, node_score, usable, Result, SearchConfig, SearchError};
use crate::graph::{NodeId, NodeKind, ToolGraph};
use crate::plan::SubgraphPlan;

/// Bound history and pruning events of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlphaBetaTrace {
    /// α after every update, starting with α₀.
    pub alphas: Vec<f64>,
    /// β after every update, starting with β₀.
    pub betas: Vec<f64>,
    pub alpha_pruned: Vec<NodeId>,
    /// `(expanded node, predecessor that triggered the cut)`.
    pub beta_cuts: Vec<(NodeId, NodeId)>,
    pub scores: Vec<(NodeId, f64)>,
}

pub fn alpha_beta_search(
    g: &ToolGraph,
    target: &str,
    target_param: Option<&str>,
    cfg: &SearchConfig,
) -> Result<SubgraphPlan> {
    alpha_beta_search_with(g, target, target_param, cfg, &BTreeSet::new()).map(|(p, _)| p)
}

/// Breadth-first backward walk from `target`. Parameter predecessors scoring
/// under both `H(d)` and α are skipped; one scoring above β stops the
/// expansion of the current node. Nodes in `exclude` and pruned APIs are
/// never entered.
pub fn alpha_beta_search_with(
    g: &ToolGraph,
    target: &str,
    target_param: Option<&str>,
    cfg: &SearchConfig,
    exclude: &BTreeSet<NodeId>,
) -> Result<(SubgraphPlan, AlphaBetaTrace)> {
    cfg.validate()?;
    check_target(g, target, exclude)?;
    if let Some(p) = target_param {
        if g.kind_of(p) != Some(NodeKind::Param) {
            return Err(SearchError::NotAParam(p.into()));
        }
    }
    let mut alpha = cfg.alpha0;
    let mut beta = cfg.beta0;
    let mut trace = AlphaBetaTrace {
        alphas: vec![alpha],
        betas: vec![beta],
        ..AlphaBetaTrace::default()
    };
    let mut depth: BTreeMap<NodeId, usize> = BTreeMap::from([(NodeId::from(target), 0)]);
    let mut queue = VecDeque::from([NodeId::from(target)]);
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if d >= cfg.d_max_ab {
            continue;
        }
        let preds: Vec<NodeId> = g.predecessors(v.as_str()).map(|e| e.src.clone()).collect();
        for p in preds {
            if depth.contains_key(&p) || !usable(g, p.as_str(), exclude) {
                continue;
            }
            let s = node_score(g, p.as_str(), v.as_str(), target, target_param, d)?;
            trace.scores.push((p.clone(), s));
            if g.kind_of(p.as_str()) == Some(NodeKind::Param) {
                if s < dynamic_threshold(d) && s < alpha {
                    trace.alpha_pruned.push(p);
                    continue;
                }
                if s > beta {
                    trace.beta_cuts.push((v.clone(), p));
                    break;
                }
            }
            alpha = alpha.max(0.85 * s);
            beta = beta.min(1.15 * s);
            trace.alphas.push(alpha);
            trace.betas.push(beta);
            depth.insert(p.clone(), d + 1);
            queue.push_back(p);
        }
    }
    let nodes: BTreeSet<NodeId> = depth.into_keys().collect();
    let mut plan = SubgraphPlan::induced(g, vec![target.into()], &nodes);
    plan.score = fitness(g, &plan)?;
    Ok((plan, trace))
}
