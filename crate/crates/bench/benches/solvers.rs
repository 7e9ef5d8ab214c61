use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gridseg::adversary::{replay_attack, solve_worst_case_attack, AttackInstance};
use gridseg::ccg::{run_ccg, CcgLimits};
use gridseg::fleet::{maximal_segmentation, minimal_segmentation};
use gridseg::grid::{build_network_matrices, electrical_distances};
use gridseg::SolverOptions;
use gridseg_bench::bench_instance;

fn network(c: &mut Criterion) {
    let m = bench_instance(7);
    c.bench_function("network_matrices", |b| {
        b.iter(|| build_network_matrices(black_box(&m.instance.grid)).unwrap())
    });
    c.bench_function("electrical_distances", |b| {
        b.iter(|| electrical_distances(black_box(&m.instance.matrices)))
    });
    let seg = minimal_segmentation(&m.instance.fleet);
    let attack = AttackInstance::none(&m.instance, &seg);
    c.bench_function("replay_attack", |b| {
        b.iter(|| replay_attack(&m.instance, black_box(&attack), &m.params).unwrap())
    });
}

fn adversary(c: &mut Criterion) {
    let m = bench_instance(7);
    let opts = SolverOptions::default();
    let minimal = minimal_segmentation(&m.instance.fleet);
    let (finest, _) = maximal_segmentation(&m.instance.fleet);
    c.bench_function("worst_case_minimal", |b| {
        b.iter(|| solve_worst_case_attack(&m.instance, &minimal, &m.params, &opts).unwrap())
    });
    c.bench_function("worst_case_finest", |b| {
        b.iter(|| solve_worst_case_attack(&m.instance, &finest, &m.params, &opts).unwrap())
    });
}

fn defense(c: &mut Criterion) {
    let m = bench_instance(7);
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("defense");
    group.sample_size(10);
    group.bench_function("ccg", |b| {
        b.iter(|| run_ccg(&m.instance, m.k, &m.params, &CcgLimits::default(), &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, network, adversary, defense);
criterion_main!(benches);
