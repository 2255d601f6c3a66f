//! Graph construction from API schemas with greedy parameter clustering.

use std::collections::BTreeSet;

use super::{
    is_valid_token, ApiNode, Batch, GraphError, InvocationStats, Node, NodeId, ParamMember, ParamNode, Result,
    ToolGraph,
};
use crate::similarity::{tokens, SimilarityProvider};

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub description: String,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        ParamSpec {
            name: name.into(),
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiSpec {
    pub id: String,
    pub name: String,
    pub description: String,
    pub inputs: Vec<ParamSpec>,
    pub outputs: Vec<ParamSpec>,
}

fn member_text(name: &str, description: &str) -> String {
    format!("{name} {description}")
}

/// Member name with the most word tokens, then the longest, then the first.
pub fn default_canonical_name(members: &[ParamMember]) -> String {
    let mut best: Option<(&ParamMember, usize)> = None;
    for m in members {
        let n = tokens(&m.original).count();
        match best {
            Some((b, bn)) if (bn, b.original.len()) >= (n, m.original.len()) => {}
            _ => best = Some((m, n)),
        }
    }
    best.map(|(m, _)| m.original.clone()).unwrap_or_default()
}

fn validate_spec(spec: &ApiSpec) -> Result<()> {
    for tok in [&spec.id, &spec.name] {
        if !is_valid_token(tok) {
            return Err(GraphError::InvalidToken(tok.clone()));
        }
    }
    if spec.description.trim().is_empty() {
        return Err(GraphError::EmptyDescription(spec.id.clone()));
    }
    let mut seen = BTreeSet::new();
    for p in spec.inputs.iter().chain(&spec.outputs) {
        if p.name.is_empty() {
            return Err(GraphError::EmptyParamName(spec.id.as_str().into()));
        }
        if !is_valid_token(&p.name) {
            return Err(GraphError::InvalidToken(p.name.clone()));
        }
        if !seen.insert(p.name.as_str()) {
            return Err(GraphError::DuplicateParam {
                api: spec.id.as_str().into(),
                name: p.name.clone(),
            });
        }
    }
    Ok(())
}

struct Cluster {
    members: Vec<ParamMember>,
    /// Existing parameter node this cluster extends, if any.
    existing: Option<NodeId>,
}

/// Greedy single-linkage agglomeration in input order. A raw parameter joins
/// the most similar cluster at or above `threshold`; clusters that already
/// hold a parameter of the same API are skipped so every API touches a
/// parameter node at most once.
fn assign(clusters: &mut Vec<Cluster>, member: ParamMember, sim: &dyn SimilarityProvider, threshold: f64) -> usize {
    let text = member_text(&member.original, &member.description);
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        if c.members.iter().any(|m| m.api == member.api) {
            continue;
        }
        let s = c
            .members
            .iter()
            .map(|m| sim.similarity(&member_text(&m.original, &m.description), &text))
            .fold(f64::NEG_INFINITY, f64::max);
        if s >= threshold && best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, _)) => {
            clusters[i].members.push(member);
            i
        }
        None => {
            clusters.push(Cluster {
                members: vec![member],
                existing: None,
            });
            clusters.len() - 1
        }
    }
}

fn fresh_param_id(b: &Batch<'_>, canonical: &str, taken: &BTreeSet<NodeId>) -> NodeId {
    let base = format!("param-{canonical}");
    let mut id = NodeId::new(base.clone());
    let mut n = 2;
    while b.contains(id.as_str()) || taken.contains(&id) {
        id = NodeId::new(format!("{base}_{n}"));
        n += 1;
    }
    id
}

struct Wiring {
    api: NodeId,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

fn add_apis_and_params(
    b: &mut Batch<'_>,
    specs: &[ApiSpec],
    clusters: &mut Vec<Cluster>,
    sim: &dyn SimilarityProvider,
    threshold: f64,
) -> Result<()> {
    let mut wiring = Vec::with_capacity(specs.len());
    for spec in specs {
        b.add_node(Node::Api(ApiNode {
            id: spec.id.as_str().into(),
            name: spec.name.clone(),
            description: spec.description.clone(),
            stats: InvocationStats::default(),
            active: true,
        }))?;
        let mut w = Wiring {
            api: spec.id.as_str().into(),
            inputs: vec![],
            outputs: vec![],
        };
        for (list, out) in [(&spec.inputs, &mut w.inputs), (&spec.outputs, &mut w.outputs)] {
            for p in list {
                let m = ParamMember {
                    api: spec.id.as_str().into(),
                    original: p.name.clone(),
                    description: p.description.clone(),
                };
                out.push(assign(clusters, m, sim, threshold));
            }
        }
        wiring.push(w);
    }

    let mut taken = BTreeSet::new();
    let mut ids = Vec::with_capacity(clusters.len());
    for c in clusters.iter() {
        match &c.existing {
            Some(id) => {
                let known = b.param(id.as_str()).map_or(0, |p| p.members.len());
                for m in c.members.iter().skip(known) {
                    b.add_param_member(id.as_str(), m.clone())?;
                }
                ids.push(id.clone());
            }
            None => {
                let canonical = sim.canonical_name(&c.members);
                if !is_valid_token(&canonical) {
                    return Err(GraphError::InvalidToken(canonical));
                }
                let id = fresh_param_id(b, &canonical, &taken);
                taken.insert(id.clone());
                b.add_node(Node::Param(ParamNode {
                    id: id.clone(),
                    canonical_name: canonical,
                    members: c.members.clone(),
                    stats: InvocationStats::default(),
                }))?;
                ids.push(id);
            }
        }
    }

    for w in wiring {
        for &i in &w.inputs {
            b.add_edge(ids[i].as_str(), w.api.as_str())?;
        }
        for &i in &w.outputs {
            b.add_edge(w.api.as_str(), ids[i].as_str())?;
        }
    }
    Ok(())
}

/// Builds a graph from API schemas. Parameters are clustered into
/// standardized parameter nodes; inputs become `param -> api` edges and
/// outputs `api -> param` edges, all with zero weights. The result is at
/// version 1.
pub fn build_graph(specs: &[ApiSpec], sim: &dyn SimilarityProvider, threshold: f64) -> Result<ToolGraph> {
    if specs.is_empty() {
        return Err(GraphError::NoApis);
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(GraphError::InvalidThreshold(threshold));
    }
    let mut seen = BTreeSet::new();
    for spec in specs {
        validate_spec(spec)?;
        if !seen.insert(spec.id.as_str()) {
            return Err(GraphError::DuplicateNode(spec.id.as_str().into()));
        }
    }
    let mut g = ToolGraph::new();
    g.batch(|b| add_apis_and_params(b, specs, &mut Vec::new(), sim, threshold))?;
    Ok(g)
}

/// Adds one new API to an existing graph. Its parameters are clustered
/// against the existing parameter nodes with the same provider and threshold
/// used for construction; new stats and edge weights start at zero and
/// existing edges are not touched.
pub fn integrate_api(g: &mut ToolGraph, spec: &ApiSpec, sim: &dyn SimilarityProvider, threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(GraphError::InvalidThreshold(threshold));
    }
    validate_spec(spec)?;
    if g.contains(&spec.id) {
        return Err(GraphError::DuplicateNode(spec.id.as_str().into()));
    }
    let mut clusters: Vec<Cluster> = g
        .params()
        .map(|p| Cluster {
            members: p.members.clone(),
            existing: Some(p.id.clone()),
        })
        .collect();
    g.batch(|b| add_apis_and_params(b, std::slice::from_ref(spec), &mut clusters, sim, threshold))
}
