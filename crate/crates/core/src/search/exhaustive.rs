use std::collections::BTreeSet;

use super::fitness::FitnessWeights;
use super::local::{lex_less, Local};
use super::{backward_neighborhood, check_target, Result, SearchError};
use crate::graph::{NodeId, ToolGraph};
use crate::plan::SubgraphPlan;

/// Largest candidate neighborhood, target included, that will be enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 20;

pub fn exhaustive_search(g: &ToolGraph, target: &str, d_max: usize) -> Result<SubgraphPlan> {
    exhaustive_search_with(g, target, d_max, &BTreeSet::new())
}

/// Fitness-maximal target-connected subset of the `d_max`-hop backward
/// neighborhood. Ties go to the lexicographically smallest node list.
pub fn exhaustive_search_with(
    g: &ToolGraph,
    target: &str,
    d_max: usize,
    exclude: &BTreeSet<NodeId>,
) -> Result<SubgraphPlan> {
    check_target(g, target, exclude)?;
    let nodes: BTreeSet<NodeId> = backward_neighborhood(g, target, d_max, exclude).into_keys().collect();
    if nodes.len() > EXHAUSTIVE_LIMIT {
        return Err(SearchError::NeighborhoodTooLarge {
            size: nodes.len(),
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let local = Local::new(g, &nodes, &[NodeId::from(target)], None);
    let t = local.targets[0];
    let free: Vec<usize> = (0..local.len()).filter(|&i| i != t).collect();
    let weights = FitnessWeights::default();
    let mut best: Option<(Vec<bool>, f64)> = None;
    for bits in 0u32..(1u32 << free.len()) {
        let mut mask = vec![false; local.len()];
        mask[t] = true;
        for (j, &i) in free.iter().enumerate() {
            mask[i] = bits >> j & 1 == 1;
        }
        let mut repaired = mask.clone();
        local.repair(&mut repaired);
        if repaired != mask {
            continue;
        }
        let f = local.breakdown(&mask, &weights).total;
        let wins = match &best {
            None => true,
            Some((bm, bf)) => f > *bf || (f == *bf && lex_less(&local, &mask, bm)),
        };
        if wins {
            best = Some((mask, f));
        }
    }
    let (mask, f) = best.expect("the target alone is always a candidate");
    Ok(local.plan(g, &mask, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ApiSpec, ParamSpec};
    use crate::search::fitness;
    use crate::similarity::LexicalSimilarity;

    fn spec(id: &str, i: &[&str], o: &[&str]) -> ApiSpec {
        ApiSpec {
            id: id.into(),
            name: id.into(),
            description: format!("{id} op"),
            inputs: i.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
            outputs: o.iter().map(|n| ParamSpec::new(*n, format!("{n} v"))).collect(),
        }
    }

    #[test]
    fn single_node() {
        let g = build_graph(&[spec("t", &[], &[])], &LexicalSimilarity, 0.8).unwrap();
        let p = exhaustive_search(&g, "t", 4).unwrap();
        assert_eq!(p.nodes.len(), 1);
    }

    #[test]
    fn four_node_fixture_matches_hand_enumeration() {
        // t <- k <- a, t <- m: supersets of {t} that stay connected.
        let mut g = build_graph(&[spec("a", &[], &["k"]), spec("t", &["k", "m"], &[])], &LexicalSimilarity, 0.8)
            .unwrap();
        g.batch(|b| {
            b.set_w_search("param-k", "t", 0.9)?;
            b.set_w_search("param-m", "t", 0.2)?;
            b.set_w_search("a", "param-k", 0.7)
        })
        .unwrap();
        let candidates: [&[&str]; 5] = [
            &["t"],
            &["t", "param-k"],
            &["t", "param-m"],
            &["t", "param-k", "param-m"],
            &["t", "param-k", "a"],
        ];
        let mut want: Option<(f64, Vec<&str>)> = None;
        for c in candidates {
            let set = c.iter().map(|n| NodeId::from(*n)).collect();
            let f = fitness(&g, &SubgraphPlan::induced(&g, vec!["t".into()], &set)).unwrap();
            if want.as_ref().is_none_or(|(bf, _)| f > *bf) {
                want = Some((f, c.to_vec()));
            }
        }
        let (wf, wn) = want.unwrap();
        let got = exhaustive_search(&g, "t", 4).unwrap();
        assert_eq!(got.score, wf);
        let mut wn: Vec<_> = wn.into_iter().map(NodeId::from).collect();
        wn.sort();
        assert_eq!(got.nodes.into_iter().collect::<Vec<_>>(), wn);
    }

    #[test]
    fn refuses_large_neighborhoods() {
        let inputs: Vec<String> = (0..25).map(|i| format!("in{i}")).collect();
        let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let g = build_graph(&[spec("t", &refs, &[])], &LexicalSimilarity, 0.8).unwrap();
        match exhaustive_search(&g, "t", 4) {
            Err(SearchError::NeighborhoodTooLarge { size, limit }) => assert_eq!((size, limit), (26, 20)),
            other => panic!("{other:?}"),
        }
    }
}
