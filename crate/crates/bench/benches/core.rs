use criterion::{black_box, criterion_group, criterion_main, Criterion};
use flagdyn::automaton::{enumerate_paths, verify_compatibility, CertifyOptions, PathStrategy};
use flagdyn::domains::{contraction_factor, zimmer_metric};
use flagdyn::dynamics::{contracting_limit, limit_set_sample, DynamicsOptions};
use flagdyn::linalg::{exterior_power, svd};
use flagdyn_bench::{nested_balls, schottky, test_matrix};

fn linalg(c: &mut Criterion) {
    let g = test_matrix(5);
    c.bench_function("svd 5x5", |b| b.iter(|| svd(black_box(&g)).unwrap()));
    c.bench_function("exterior power 5x5 k=2", |b| b.iter(|| exterior_power(black_box(&g), 2).unwrap()));
}

fn domains(c: &mut Criterion) {
    let (inner, outer) = nested_balls();
    let (x, y) = (inner.center(), inner.boundary_points(8)[0].clone());
    c.bench_function("hilbert metric ball", |b| b.iter(|| zimmer_metric(&outer, &x, &y, 0).unwrap()));
    c.bench_function("contraction factor balls", |b| {
        b.iter(|| contraction_factor(&inner, &outer, 400).unwrap())
    });
}

fn automaton(c: &mut Criterion) {
    let sys = schottky();
    let opts = CertifyOptions::default();
    c.bench_function("certify schottky", |b| {
        b.iter(|| verify_compatibility(&sys.graph, &sys.system, &sys.presentation, &opts).unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let sys = schottky();
    let opts = DynamicsOptions::default();
    let path = enumerate_paths(&sys.graph, &sys.table, 20, &PathStrategy::Random { seed: 1, count: 1 })
        .unwrap()
        .paths
        .remove(0);
    c.bench_function("contracting limit depth 20", |b| {
        b.iter(|| contracting_limit(&sys, &path, 20, &opts).unwrap())
    });
    c.bench_function("limit set 200 points depth 20", |b| {
        b.iter(|| limit_set_sample(&sys, 20, 200, 7, &opts).unwrap())
    });
}

criterion_group!(benches, linalg, domains, automaton, dynamics);
criterion_main!(benches);
