//! One worker versus the default pool on the two data-parallel workloads:
//! independent Monte Carlo replicas and batched exact evolution. Build with
//! `--no-default-features` to time the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kcm::exact::{build_generator, worst_case_distance, DistanceMode};
use kcm::experiments::{tau_samples, TauOptions};
use kcm::measure::DEFAULT_STATE_CAP;
use kcm::{par, Model, Region};
use std::hint::black_box;

fn pools() -> Vec<(&'static str, Option<usize>)> {
    vec![("one-thread", Some(1)), ("default-pool", None)]
}

fn replicas(c: &mut Criterion) {
    let model = Model::north_east(2, 8, 0.3).unwrap();
    let opts = TauOptions {
        replicas: 200,
        seed: 1,
        ..TauOptions::default()
    };
    let mut group = c.benchmark_group("tau_star_replicas");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| par::install(t, || black_box(tau_samples(&model, &opts).unwrap())))
        });
    }
    group.finish();
}

fn batch_evolution(c: &mut Criterion) {
    let model = Model::north_east(2, 3, 0.3).unwrap();
    let gen = build_generator(&model, &Region::full(&model), DEFAULT_STATE_CAP).unwrap();
    let mut group = c.benchmark_group("worst_case_rows");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &threads, |b, &t| {
            b.iter(|| {
                par::install(t, || {
                    black_box(worst_case_distance(&gen, 5.0, DistanceMode::Tv, 1e-10).unwrap())
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replicas, batch_evolution);
criterion_main!(benches);
