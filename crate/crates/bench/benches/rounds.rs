use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nrps_core::analysis::product_matrix;
use nrps_core::graph::{equal_neighbor_weights, generate_erdos_renyi};
use nrps_core::noise::{sample_round, NoiseModel};
use nrps_core::protocol::{nrps_round, ProblemInstance, SimulationState, DEFAULT_EPS_Y};
use nrps_core::schedules::make_beta;

fn instance(n: usize) -> ProblemInstance {
    let net = generate_erdos_renyi(n, (3.5 / n as f64).min(0.35), 1).unwrap();
    let w = equal_neighbor_weights(&net).unwrap();
    ProblemInstance::new(net, w, ProblemInstance::ramp(n)).unwrap()
}

fn bench_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("nrps_round");
    for n in [10, 100] {
        let inst = instance(n);
        let noise = NoiseModel::uniform(-1.0, 1.0, 7);
        let state = SimulationState::initial(&inst);
        let eta = sample_round(&noise, inst.net(), 0, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| nrps_round(&inst, black_box(&state), 0.2, 100.0, &eta, DEFAULT_EPS_Y).unwrap())
        });
    }
    group.finish();
}

fn bench_sample(c: &mut Criterion) {
    let inst = instance(100);
    let noise = NoiseModel::uniform(-1.0, 1.0, 7);
    c.bench_function("sample_round/100", |b| b.iter(|| sample_round(&noise, inst.net(), black_box(42), 1)));
}

fn bench_product(c: &mut Criterion) {
    let inst = instance(10);
    let beta = make_beta(0.2, 1.0, 1.5, 500).unwrap();
    c.bench_function("product_matrix/10x1000", |b| {
        b.iter(|| product_matrix(inst.weights(), &beta, 0, black_box(999)))
    });
}

criterion_group!(benches, bench_round, bench_sample, bench_product);
criterion_main!(benches);
