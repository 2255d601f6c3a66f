use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use toolnav_bench::{chain_graph, last_api};
use toolnav_core::search::{alpha_beta_search, exhaustive_search, fitness, heuristic_search, SearchConfig};

fn searches(c: &mut Criterion) {
    let cfg = SearchConfig::default();
    let mut group = c.benchmark_group("search");
    for n in [8usize, 32, 128] {
        let g = chain_graph(n);
        let t = last_api(&g);
        group.bench_with_input(BenchmarkId::new("alpha_beta", n), &n, |b, _| {
            b.iter(|| alpha_beta_search(black_box(&g), t.as_str(), None, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("heuristic", n), &n, |b, _| {
            b.iter(|| heuristic_search(black_box(&g), std::slice::from_ref(&t), &cfg).unwrap())
        });
    }
    // Depth 2 keeps the candidate set within the exhaustive limit.
    let g = chain_graph(32);
    let t = last_api(&g);
    group.bench_function("exhaustive/depth2", |b| {
        b.iter(|| exhaustive_search(black_box(&g), t.as_str(), 2).unwrap())
    });
    let plan = heuristic_search(&g, std::slice::from_ref(&t), &cfg).unwrap();
    group.bench_function("fitness", |b| b.iter(|| fitness(black_box(&g), &plan).unwrap()));
    group.finish();
}

criterion_group!(benches, searches);
criterion_main!(benches);
