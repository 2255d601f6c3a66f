use std::collections::BTreeSet;

use super::{AgentError, RetrievalRequest, Result};
use crate::graph::{NodeId, ToolGraph};
use crate::plan::SubgraphPlan;
use crate::search::{alpha_beta_search_with, heuristic_search_with, SearchConfig};
use crate::similarity::SimilarityProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMethod {
    #[default]
    Heuristic,
    AlphaBeta,
}

impl std::str::FromStr for SearchMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heuristic" | "heur" => Ok(SearchMethod::Heuristic),
            "alpha-beta" | "ab" => Ok(SearchMethod::AlphaBeta),
            other => Err(format!("unknown search method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalConfig {
    pub search: SearchConfig,
    pub method: SearchMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub targets: Vec<NodeId>,
    pub plan: SubgraphPlan,
    pub tree: String,
}

/// Text an API is ranked by: its name, description and output names.
pub fn api_text(g: &ToolGraph, api: &str) -> String {
    let Some(node) = g.api(api) else { return String::new() };
    let mut text = format!("{} {}", node.name, node.description);
    for out in g.outputs_of(api) {
        if let Some(p) = g.param(out.as_str()) {
            text.push(' ');
            text.push_str(&p.canonical_name);
            if let Some(orig) = p.original_name_for(api) {
                if orig != p.canonical_name {
                    text.push(' ');
                    text.push_str(orig);
                }
            }
        }
    }
    text
}

/// Active, non-excluded APIs with positive similarity to `text`, best first,
/// ties by id.
pub fn rank_apis(
    g: &ToolGraph,
    ranker: &dyn SimilarityProvider,
    text: &str,
    exclude: &BTreeSet<NodeId>,
) -> Vec<(NodeId, f64)> {
    let mut ranked: Vec<(NodeId, f64)> = g
        .apis()
        .filter(|a| a.active && !exclude.contains(&a.id))
        .map(|a| (a.id.clone(), ranker.similarity(text, &api_text(g, a.id.as_str()))))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

fn request_text(req: &RetrievalRequest) -> String {
    let mut text = req.description.clone();
    for name in &req.desired_outputs {
        text.push(' ');
        text.push_str(name);
    }
    text
}

/// Ranks APIs against the request (unless it already names targets), searches
/// backwards from each of the top three and merges the plans.
pub fn retrieve_toolchain(
    req: &RetrievalRequest,
    g: &ToolGraph,
    ranker: &dyn SimilarityProvider,
    cfg: &RetrievalConfig,
    exclude: &BTreeSet<NodeId>,
) -> Result<Retrieval> {
    let given: Vec<NodeId> = req
        .targets()
        .filter(|t| g.api(t.as_str()).is_some_and(|a| a.active) && !exclude.contains(*t))
        .cloned()
        .collect();
    let targets: Vec<NodeId> = if given.is_empty() {
        rank_apis(g, ranker, &request_text(req), exclude)
            .into_iter()
            .take(3)
            .map(|(id, _)| id)
            .collect()
    } else {
        given
    };
    if targets.is_empty() {
        return Err(AgentError::EmptyPlan);
    }
    let plan = match cfg.method {
        SearchMethod::Heuristic => heuristic_search_with(g, &targets, &cfg.search, exclude)?.merged,
        SearchMethod::AlphaBeta => {
            let mut plans = Vec::with_capacity(targets.len());
            for t in &targets {
                let outs = g.outputs_of(t.as_str());
                let target_param = outs
                    .iter()
                    .find(|o| g.param(o.as_str()).is_some_and(|p| req.desired_outputs.contains(&p.canonical_name)));
                let (p, _) =
                    alpha_beta_search_with(g, t.as_str(), target_param.map(NodeId::as_str), &cfg.search, exclude)?;
                plans.push(p);
            }
            SubgraphPlan::merge(&plans)
        }
    };
    let tree = crate::graph::serialize_subgraph(g, &plan).unwrap_or_default();
    Ok(Retrieval { targets, plan, tree })
}
