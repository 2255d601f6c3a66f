//! Node features, the link-prediction training objective as plain functions,
//! and the pluggable scorer that fills search weights.

use thiserror::Error;

use crate::graph::{EdgeKey, GraphError, ToolGraph};
use crate::similarity::tokens;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("probability {0} must lie strictly inside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("loss needs at least one sample")]
    Empty,
    #[error("positive sample {0} has no negatives")]
    NoNegatives(usize),
    #[error("scorer returned {got} values for {want} edges")]
    LengthMismatch { got: usize, want: usize },
    #[error("scorer value {value} for {src} -> {dst} outside [0, 1]")]
    OutOfRange { src: String, dst: String, value: f64 },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps text to a fixed-length vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Feature hashing of lowercase word tokens, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(64)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for tok in tokens(text) {
            v[(fnv1a(tok.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub embedding: Vec<f64>,
    pub succ_sig: f64,
    pub ratio_sig: f64,
    pub indeg_sig: f64,
    pub outdeg_sig: f64,
}

impl NodeFeatures {
    /// `embedding ⊕ σ(n_succ) ⊕ σ(r_succ) ⊕ σ(deg_in) ⊕ σ(deg_out)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.embedding.clone();
        v.extend([self.succ_sig, self.ratio_sig, self.indeg_sig, self.outdeg_sig]);
        v
    }

    pub fn len(&self) -> usize {
        self.embedding.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Semantic plus structural features of one node. Counts and degrees go
/// through the sigmoid unscaled, so they saturate above a handful.
pub fn fuse_features(g: &ToolGraph, id: &str, embedder: &dyn Embedder) -> Result<NodeFeatures, ScoringError> {
    let node = g.node(id).ok_or_else(|| ScoringError::UnknownNode(id.into()))?;
    let text = format!("{} {}", node.name(), node.description());
    let stats = node.stats();
    Ok(NodeFeatures {
        embedding: embedder.embed(&text),
        succ_sig: sigmoid(stats.n_succ as f64),
        ratio_sig: sigmoid(stats.success_ratio()),
        indeg_sig: sigmoid(g.in_degree(id) as f64),
        outdeg_sig: sigmoid(g.out_degree(id) as f64),
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Soft-label binary cross-entropy over `(p_uv, w_uv)` pairs.
pub fn ce_loss(pairs: &[(f64, f64)]) -> Result<f64, ScoringError> {
    if pairs.is_empty() {
        return Err(ScoringError::Empty);
    }
    let mut sum = 0.0;
    for &(p, w) in pairs {
        if !(p > 0.0 && p < 1.0) {
            return Err(ScoringError::ProbabilityOutOfRange(p));
        }
        sum += w * p.ln() + (1.0 - w) * (1.0 - p).ln();
    }
    Ok(-sum / pairs.len() as f64)
}

/// `m0 · (1 + σ(w))`.
pub fn adaptive_margin(m0: f64, w_stat: f64) -> f64 {
    m0 * (1.0 + sigmoid(w_stat))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSample {
    pub s_pos: f64,
    pub margin: f64,
    pub negatives: Vec<f64>,
}

/// Mean over positives of the mean hinge `[m − s⁺ + s⁻]₊` over that
/// positive's negatives.
pub fn margin_loss(samples: &[MarginSample]) -> Result<f64, ScoringError> {
    if samples.is_empty() {
        return Err(ScoringError::Empty);
    }
    let mut total = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if s.negatives.is_empty() {
            return Err(ScoringError::NoNegatives(i));
        }
        let hinge: f64 = s
            .negatives
            .iter()
            .map(|neg| (s.margin - s.s_pos + neg).max(0.0))
            .sum();
        total += hinge / s.negatives.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// `μ0 · γ^t`.
pub fn curriculum_weight(mu0: f64, gamma: f64, t: u32) -> f64 {
    mu0 * gamma.powf(f64::from(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub ce: f64,
    pub margin: f64,
    pub mu_t: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, margin: f64, mu_t: f64) -> Self {
        LossBreakdown {
            ce,
            margin,
            mu_t,
            total: mu_t * ce + (1.0 - mu_t) * margin,
        }
    }
}

/// Produces one search weight in `[0, 1]` per edge, deterministically.
pub trait EdgeScorer {
    fn score(&self, g: &ToolGraph, edges: &[EdgeKey]) -> Vec<f64>;
}

/// Uses the statistical weight as the search weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatisticalScorer;

impl EdgeScorer for StatisticalScorer {
    fn score(&self, g: &ToolGraph, edges: &[EdgeKey]) -> Vec<f64> {
        edges
            .iter()
            .map(|k| g.edge_by_key(k).map_or(0.0, |e| e.w_stat))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl EdgeScorer for ConstantScorer {
    fn score(&self, _: &ToolGraph, edges: &[EdgeKey]) -> Vec<f64> {
        vec![self.0; edges.len()]
    }
}

/// Wraps a per-edge closure.
pub struct FnScorer<F>(pub F);

impl<F: Fn(&ToolGraph, &EdgeKey) -> f64> EdgeScorer for FnScorer<F> {
    fn score(&self, g: &ToolGraph, edges: &[EdgeKey]) -> Vec<f64> {
        edges.iter().map(|k| (self.0)(g, k)).collect()
    }
}

/// Sets every edge's search weight from `scorer` in one batch. Any value
/// outside `[0, 1]` rejects the whole batch.
pub fn score_edges(g: &mut ToolGraph, scorer: &dyn EdgeScorer) -> Result<(), ScoringError> {
    let keys: Vec<EdgeKey> = g.edge_keys().cloned().collect();
    let values = scorer.score(g, &keys);
    if values.len() != keys.len() {
        return Err(ScoringError::LengthMismatch {
            got: values.len(),
            want: keys.len(),
        });
    }
    for (k, &v) in keys.iter().zip(&values) {
        if !(0.0..=1.0).contains(&v) {
            return Err(ScoringError::OutOfRange {
                src: k.src.to_string(),
                dst: k.dst.to_string(),
                value: v,
            });
        }
    }
    g.batch(|b| {
        for (k, v) in keys.iter().zip(values) {
            b.set_w_search(k.src.as_str(), k.dst.as_str(), v)?;
        }
        Ok::<_, GraphError>(())
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ApiSpec, ParamSpec};
    use crate::similarity::LexicalSimilarity;

    const LN2: f64 = std::f64::consts::LN_2;

    fn graph() -> ToolGraph {
        let spec = |id: &str, i: &[&str], o: &[&str]| ApiSpec {
            id: id.into(),
            name: id.into(),
            description: format!("{id} service"),
            inputs: i.iter().map(|n| ParamSpec::new(*n, format!("{n} field"))).collect(),
            outputs: o.iter().map(|n| ParamSpec::new(*n, format!("{n} field"))).collect(),
        };
        build_graph(
            &[spec("a", &["x"], &["y"]), spec("b", &["y"], &["z"]), spec("c", &["z", "x"], &[])],
            &LexicalSimilarity,
            0.8,
        )
        .unwrap()
    }

    #[test]
    fn fresh_node_features_sit_at_one_half() {
        let mut g = graph();
        g.batch(|b| b.add_node(crate::graph::Node::Api(crate::graph::ApiNode {
            id: "lonely".into(),
            name: "lonely".into(),
            description: "nothing attached".into(),
            stats: Default::default(),
            active: true,
        })))
        .unwrap();
        let f = fuse_features(&g, "lonely", &HashingEmbedder::default()).unwrap();
        for v in [f.succ_sig, f.ratio_sig, f.indeg_sig, f.outdeg_sig] {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn ratio_feature_uses_success_ratio() {
        let mut g = graph();
        g.batch(|b| {
            for ok in [true, true, true, false] {
                b.record("a", 1, vec![], ok)?;
            }
            Ok::<_, GraphError>(())
        })
        .unwrap();
        let f = fuse_features(&g, "a", &HashingEmbedder::default()).unwrap();
        assert!((f.ratio_sig - 0.679_178_699_175_393).abs() < 1e-12);
        assert!((f.succ_sig - sigmoid(3.0)).abs() < 1e-15);
    }

    #[test]
    fn feature_length_is_dim_plus_four() {
        let g = graph();
        let emb = HashingEmbedder::new(8);
        for id in g.node_ids() {
            let f = fuse_features(&g, id.as_str(), &emb).unwrap();
            assert_eq!(f.to_vec().len(), 12);
            assert_eq!(f.len(), 12);
        }
    }

    #[test]
    fn hashing_embedding_is_unit_norm() {
        let v = HashingEmbedder::default().embed("Find weather by city");
        assert!((dot(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(v, HashingEmbedder::default().embed("find WEATHER by city"));
    }

    #[test]
    fn ce_loss_values() {
        assert!((ce_loss(&[(0.5, 1.0)]).unwrap() - LN2).abs() < 1e-12);
        assert!((ce_loss(&[(0.5, 0.5)]).unwrap() - LN2).abs() < 1e-12);
        assert!(matches!(ce_loss(&[(0.0, 1.0)]), Err(ScoringError::ProbabilityOutOfRange(_))));
        assert!(matches!(ce_loss(&[(1.0, 0.0)]), Err(ScoringError::ProbabilityOutOfRange(_))));
        assert!(matches!(ce_loss(&[]), Err(ScoringError::Empty)));
    }

    #[test]
    fn ce_loss_grid_minimum_sits_at_the_label() {
        for w in [0.0, 0.1, 0.25, 0.5, 0.8, 1.0] {
            let grid = (1..1000).map(|i| i as f64 / 1000.0);
            let (best_p, _) = grid
                .map(|p| (p, ce_loss(&[(p, w)]).unwrap()))
                .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let expect = w.clamp(0.001, 0.999);
            assert!((best_p - expect).abs() < 1e-9, "w={w} best={best_p}");
        }
    }

    #[test]
    fn margin_values() {
        assert_eq!(adaptive_margin(1.0, 0.0), 1.5);
        assert!((adaptive_margin(1.0, 1.0) - 1.731_058_578_630_005).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=100 {
            let m = adaptive_margin(2.0, i as f64 / 100.0);
            assert!((3.0..=2.0 * 1.731_058_578_630_005).contains(&m) && m >= prev);
            prev = m;
        }
    }

    #[test]
    fn hinge_cases() {
        let s = |p: f64, m: f64, n: Vec<f64>| MarginSample {
            s_pos: p,
            margin: m,
            negatives: n,
        };
        assert_eq!(margin_loss(&[s(1.0, 0.5, vec![0.2])]).unwrap(), 0.0);
        assert_eq!(margin_loss(&[s(0.0, 0.5, vec![0.0])]).unwrap(), 0.5);
        let base = vec![s(0.3, 0.4, vec![0.1, 0.5]), s(0.2, 0.6, vec![0.4])];
        let doubled: Vec<_> = base
            .iter()
            .map(|x| s(2.0 * x.s_pos, 2.0 * x.margin, x.negatives.iter().map(|n| 2.0 * n).collect()))
            .collect();
        let (a, b) = (margin_loss(&base).unwrap(), margin_loss(&doubled).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(matches!(margin_loss(&[s(0.0, 0.5, vec![])]), Err(ScoringError::NoNegatives(0))));
    }

    #[test]
    fn curriculum_decays_geometrically() {
        assert_eq!(curriculum_weight(1.0, 0.5, 2), 0.25);
        assert_eq!(curriculum_weight(0.7, 0.9, 0), 0.7);
        for t in 0..20 {
            let (a, b) = (curriculum_weight(0.8, 0.9, t), curriculum_weight(0.8, 0.9, t + 1));
            assert!(b < a);
            assert!((b - 0.9 * a).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_breakdown_combines_exactly() {
        let l = LossBreakdown::new(0.4, 0.9, 0.25);
        assert_eq!(l.total, 0.25 * 0.4 + 0.75 * 0.9);
    }

    #[test]
    fn statistical_and_constant_scorers() {
        let mut g = graph();
        g.batch(|b| b.set_w_stat("param-x", "a", 0.75)).unwrap();
        let v = g.version();
        score_edges(&mut g, &StatisticalScorer).unwrap();
        assert_eq!(g.edge("param-x", "a").unwrap().w_search, 0.75);
        assert_eq!(g.version(), v + 1);
        score_edges(&mut g, &ConstantScorer(1.0)).unwrap();
        assert!(g.edges().all(|e| e.w_search == 1.0));
    }

    #[test]
    fn custom_scorer_matches_direct_application() {
        let mut g = graph();
        let f = |_: &ToolGraph, k: &EdgeKey| (k.src.as_str().len() + k.dst.as_str().len()) as f64 / 20.0;
        let expected: Vec<(EdgeKey, f64)> = g.edge_keys().map(|k| (k.clone(), f(&g, k))).collect();
        score_edges(&mut g, &FnScorer(f)).unwrap();
        for (k, w) in expected {
            assert_eq!(g.edge_by_key(&k).unwrap().w_search, w);
        }
    }

    #[test]
    fn out_of_range_scorer_rejects_whole_batch() {
        let mut g = graph();
        let before = g.clone();
        let bad = FnScorer(|_: &ToolGraph, k: &EdgeKey| if k.dst.as_str() == "c" { 1.2 } else { 0.5 });
        assert!(matches!(score_edges(&mut g, &bad), Err(ScoringError::OutOfRange { .. })));
        assert_eq!(g, before);
    }
}
