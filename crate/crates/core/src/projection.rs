//! Feasible-set correction of a base action distribution.
//!
//! Restricting a distribution to the admissible actions and renormalizing is
//! the KL-closest distribution supported on that set. Hard "next action must
//! be q" rules and score-based reweighting are special cases.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Mass below this counts as zero when normalizing.
pub const Z_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("distribution is empty")]
    Empty,
    #[error("probability {0} is negative or not finite")]
    BadEntry(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("feasible set is empty")]
    EmptyFeasibleSet,
    #[error("action {index} outside a distribution over {len} actions")]
    OutOfRange { index: usize, len: usize },
    #[error("feasible actions carry total mass {0}")]
    Infeasible(f64),
    #[error("{0} scores for {1} actions")]
    LengthMismatch(usize, usize),
}

pub type Result<T, E = ProjectionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    probs: Vec<f64>,
}

impl PolicyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProjectionError::Empty);
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ProjectionError::BadEntry(bad));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ProjectionError::NotNormalized(sum));
        }
        Ok(PolicyDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(ProjectionError::Empty);
        }
        if let Some(&bad) = weights.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ProjectionError::BadEntry(bad));
        }
        let z: f64 = weights.iter().sum();
        if z < Z_EPSILON {
            return Err(ProjectionError::Infeasible(z));
        }
        Ok(PolicyDistribution {
            probs: weights.iter().map(|w| w / z).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        PolicyDistribution::from_weights(&vec![1.0; n])
    }

    pub fn dirac(n: usize, q: usize) -> Result<Self> {
        if q >= n {
            return Err(ProjectionError::OutOfRange { index: q, len: n });
        }
        let mut probs = vec![0.0; n];
        probs[q] = 1.0;
        Ok(PolicyDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        (0..self.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibleSet {
    allowed: BTreeSet<usize>,
}

impl FeasibleSet {
    pub fn new(allowed: impl IntoIterator<Item = usize>) -> Result<Self> {
        let allowed: BTreeSet<usize> = allowed.into_iter().collect();
        if allowed.is_empty() {
            return Err(ProjectionError::EmptyFeasibleSet);
        }
        Ok(FeasibleSet { allowed })
    }

    pub fn full(n: usize) -> Result<Self> {
        FeasibleSet::new(0..n)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.allowed.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.allowed.iter().copied()
    }
}

/// `π(a) = π₀(a)·𝟙[a ∈ F] / Z` with `Z = Σ_{a∈F} π₀(a)`.
pub fn project(pi0: &PolicyDistribution, feas: &FeasibleSet) -> Result<PolicyDistribution> {
    let n = pi0.len();
    if let Some(bad) = feas.iter().find(|&i| i >= n) {
        return Err(ProjectionError::OutOfRange { index: bad, len: n });
    }
    let z: f64 = feas.iter().map(|i| pi0.probs[i]).sum();
    if z < Z_EPSILON {
        return Err(ProjectionError::Infeasible(z));
    }
    let probs = (0..n)
        .map(|i| if feas.contains(i) { pi0.probs[i] / z } else { 0.0 })
        .collect();
    Ok(PolicyDistribution { probs })
}

/// Normalizer `Z` of [`project`].
pub fn feasible_mass(pi0: &PolicyDistribution, feas: &FeasibleSet) -> f64 {
    feas.iter().filter_map(|i| pi0.probs.get(i)).sum()
}

/// `Σ p·ln(p/q)` with `0·ln 0 = 0`; infinite when `p` puts mass where `q`
/// has none.
pub fn kl_divergence(p: &PolicyDistribution, q: &PolicyDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(ProjectionError::LengthMismatch(p.len(), q.len()));
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum)
}

/// Dirac at `q` on trigger contexts, `pi0` elsewhere.
pub fn hard_rule_policy<K: Ord + Clone>(
    pi0_by_context: &BTreeMap<K, PolicyDistribution>,
    triggers: &BTreeSet<K>,
    q: usize,
) -> Result<BTreeMap<K, PolicyDistribution>> {
    pi0_by_context
        .iter()
        .map(|(ctx, pi0)| {
            let out = if triggers.contains(ctx) {
                project(pi0, &FeasibleSet::new([q])?)?
            } else {
                pi0.clone()
            };
            Ok((ctx.clone(), out))
        })
        .collect()
}

/// `π ∝ π₀·exp(τ·r)`; actions scored `-∞` get exactly zero.
pub fn gibbs_reweight(pi0: &PolicyDistribution, scores: &[f64], tau: f64) -> Result<PolicyDistribution> {
    if scores.len() != pi0.len() {
        return Err(ProjectionError::LengthMismatch(scores.len(), pi0.len()));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(ProjectionError::BadEntry(tau));
    }
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    // Shift by the largest finite score to keep exp in range.
    let shift = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = pi0
        .probs
        .iter()
        .zip(scores)
        .map(|(&p, &s)| {
            if s == f64::NEG_INFINITY {
                0.0
            } else if tau == 0.0 {
                p
            } else {
                p * (tau * (s - shift)).exp()
            }
        })
        .collect();
    PolicyDistribution::from_weights(&weights)
}
