use btnslab::graph::{build_graph, snake_path, GraphKind};
use btnslab::models::{heisenberg_ring, separation_hamiltonian};
use btnslab::{
    border_rank_expectation, btns_evaluate, mps_strategy_expectation, objective_and_gradient, random_init,
    InterpolationPlan, Objective,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn expectation(c: &mut Criterion) {
    let mut g = c.benchmark_group("heisenberg_expectation");
    for len in [6, 8, 10] {
        let shape = build_graph(GraphKind::Ring { len }, 2, 2).unwrap();
        let rep = random_init(&shape, 1, 1, 1).unwrap();
        let h = heisenberg_ring(len).unwrap();
        let path = snake_path(&shape).unwrap();
        let plan = InterpolationPlan::for_rep(&rep);
        g.bench_with_input(BenchmarkId::new("dense", len), &len, |b, _| b.iter(|| btns_evaluate(black_box(&rep)).unwrap()));
        g.bench_with_input(BenchmarkId::new("mps_strategy", len), &len, |b, _| {
            b.iter(|| mps_strategy_expectation(black_box(&rep), &path, Some(&h)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("border_rank", len), &len, |b, _| {
            b.iter(|| border_rank_expectation(black_box(&rep), Some(&h), &plan).unwrap())
        });
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("energy_gradient");
    g.sample_size(20);
    for (name, bond, a) in [("tns2", 2, 0), ("btns2_1", 2, 1), ("tns4", 4, 0)] {
        let shape = build_graph(GraphKind::Ring { len: 11 }, bond, 3).unwrap();
        let rep = random_init(&shape, a, a, 7).unwrap();
        let obj = Objective::Energy(separation_hamiltonian(11).unwrap());
        g.bench_function(name, |b| b.iter(|| objective_and_gradient(black_box(&rep), &obj).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, expectation, gradient);
criterion_main!(benches);
