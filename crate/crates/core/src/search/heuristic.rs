use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fitness::FitnessWeights;
use super::local::{lex_less, Local};
use super::{backward_neighborhood, check_target, Result, SearchConfig, SearchError};
use crate::graph::{NodeId, ToolGraph};
use crate::plan::SubgraphPlan;

/// Temperatures at the start of each generation: `T ← η^{1+k/5} · T` while
/// `T > 1` and `k ≤ max_gens`.
pub fn cooling_schedule(cfg: &SearchConfig) -> Vec<f64> {
    let mut temps = Vec::new();
    let mut t = cfg.t0;
    let mut k = 0usize;
    while t > 1.0 && k <= cfg.max_gens {
        temps.push(t);
        t *= cfg.eta.powf(1.0 + k as f64 / 5.0);
        k += 1;
    }
    temps
}

/// Bit flips per mutation at temperature `t`.
pub fn mutation_intensity(t: f64) -> usize {
    (t / 100.0).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeuristicTrace {
    pub temperatures: Vec<f64>,
    pub thetas: Vec<usize>,
    /// Best population fitness after each generation.
    pub best_fitness: Vec<f64>,
    pub candidates: usize,
}

impl HeuristicTrace {
    pub fn generations(&self) -> usize {
        self.temperatures.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicResult {
    pub plans: Vec<SubgraphPlan>,
    pub merged: SubgraphPlan,
    pub traces: Vec<HeuristicTrace>,
}

pub fn heuristic_search(g: &ToolGraph, targets: &[NodeId], cfg: &SearchConfig) -> Result<SubgraphPlan> {
    Ok(heuristic_search_with(g, targets, cfg, &BTreeSet::new())?.merged)
}

/// Runs one seeded evolution per target in parallel (target `i` uses seed
/// `rng_seed + i`) and merges the winners.
pub fn heuristic_search_with(
    g: &ToolGraph,
    targets: &[NodeId],
    cfg: &SearchConfig,
    exclude: &BTreeSet<NodeId>,
) -> Result<HeuristicResult> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(SearchError::NoTargets);
    }
    for t in targets {
        check_target(g, t.as_str(), exclude)?;
    }
    let runs: Vec<(SubgraphPlan, HeuristicTrace)> = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| evolve(g, t, cfg, exclude, cfg.rng_seed.wrapping_add(i as u64)))
        .collect();
    let (plans, traces): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let merged = SubgraphPlan::merge(&plans);
    Ok(HeuristicResult { plans, merged, traces })
}

struct Scored {
    gene: Vec<bool>,
    fitness: f64,
}

struct Evaluator<'a> {
    local: &'a Local,
    weights: FitnessWeights,
    cache: HashMap<Vec<bool>, f64>,
}

impl Evaluator<'_> {
    fn score(&mut self, mut gene: Vec<bool>) -> Scored {
        self.local.repair(&mut gene);
        let fitness = match self.cache.get(&gene) {
            Some(&f) => f,
            None => {
                let f = self.local.breakdown(&gene, &self.weights).total;
                self.cache.insert(gene.clone(), f);
                f
            }
        };
        Scored { gene, fitness }
    }
}

/// Higher fitness first, then the lexicographically smaller node list.
fn better(local: &Local, a: &Scored, b: &Scored) -> bool {
    a.fitness > b.fitness || (a.fitness == b.fitness && lex_less(local, &a.gene, &b.gene))
}

fn rank(local: &Local, pop: &mut [Scored]) {
    pop.sort_by(|a, b| {
        if better(local, a, b) {
            std::cmp::Ordering::Less
        } else if better(local, b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
}

fn evolve(
    g: &ToolGraph,
    target: &NodeId,
    cfg: &SearchConfig,
    exclude: &BTreeSet<NodeId>,
    seed: u64,
) -> (SubgraphPlan, HeuristicTrace) {
    let hood = backward_neighborhood(g, target.as_str(), cfg.d_max_h, exclude);
    let nodes: BTreeSet<NodeId> = hood.into_keys().collect();
    let local = Local::new(g, &nodes, std::slice::from_ref(target), None);
    let n = local.len();
    let free: Vec<usize> = (0..n).filter(|i| !local.targets.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator {
        local: &local,
        weights: FitnessWeights::default(),
        cache: HashMap::new(),
    };

    // Densities spread evenly over (0, 1) so both sparse and dense plans are seeded.
    let mut pop: Vec<Scored> = (0..cfg.pop_size)
        .map(|i| {
            let density = (i as f64 + 0.5) / cfg.pop_size as f64;
            let gene = (0..n).map(|_| rng.gen_bool(density)).collect();
            eval.score(gene)
        })
        .collect();
    rank(&local, &mut pop);

    let elite_n = ((cfg.elite_frac * cfg.pop_size as f64).ceil() as usize).clamp(1, cfg.pop_size);
    let mut trace = HeuristicTrace {
        candidates: n,
        ..HeuristicTrace::default()
    };
    for t in cooling_schedule(cfg) {
        let theta = mutation_intensity(t);
        trace.temperatures.push(t);
        trace.thetas.push(theta);
        let elites: Vec<Scored> = pop.drain(..elite_n).collect();
        let mut next: Vec<Scored> = Vec::with_capacity(cfg.pop_size);
        while next.len() + elites.len() < cfg.pop_size {
            let a = rng.gen_range(0..elites.len());
            let mut b = rng.gen_range(0..elites.len());
            if elites.len() > 1 {
                while b == a {
                    b = rng.gen_range(0..elites.len());
                }
            }
            let (pa, pb) = (&elites[a], &elites[b]);
            let mut gene: Vec<bool> = pa
                .gene
                .iter()
                .zip(&pb.gene)
                .map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y })
                .collect();
            for &i in free.choose_multiple(&mut rng, theta.min(free.len())) {
                gene[i] = !gene[i];
            }
            let child = eval.score(gene);
            let worse = if better(&local, pa, pb) { pb } else { pa };
            let accept = child.fitness >= worse.fitness || {
                let p = (-(worse.fitness - child.fitness) * 100.0 / t).exp();
                rng.gen_bool(p.clamp(0.0, 1.0))
            };
            next.push(if accept {
                child
            } else {
                Scored {
                    gene: worse.gene.clone(),
                    fitness: worse.fitness,
                }
            });
        }
        pop = elites;
        pop.append(&mut next);
        rank(&local, &mut pop);
        trace.best_fitness.push(pop[0].fitness);
    }
    let best = &pop[0];
    (local.plan(g, &best.gene, best.fitness), trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let temps = cooling_schedule(&SearchConfig::default());
        assert_eq!(temps[0], 200.0);
        assert!((temps[1] - 140.0).abs() < 1e-12);
        assert_eq!(temps.len(), 9);
        assert!(temps.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(mutation_intensity(200.0), 2);
        assert_eq!(mutation_intensity(140.0), 1);
        assert_eq!(mutation_intensity(99.0), 0);
    }

    #[test]
    fn generation_cap_binds_with_slow_cooling() {
        let cfg = SearchConfig {
            eta: 0.99,
            ..SearchConfig::default()
        };
        assert_eq!(cooling_schedule(&cfg).len(), cfg.max_gens + 1);
    }
}
