//! End-to-end timings at two scales: a small screening problem (menu of 40
//! group sizes, 3 groups) and the flagship close-call problem (60 batch
//! sizes up to 600, 15 groups, around a thousand expected observations).

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use spprt_core::{
    niod, np_min_sample_size, profile, simulate, CostModel, DesignConfig, EvalMethod, Hypotheses,
    StopRiskParams,
};

fn screening_config() -> DesignConfig {
    DesignConfig::new(
        Hypotheses::new(0.3, 0.5).unwrap(),
        (1..=40).collect(),
        CostModel::affine(0.0, 1.0),
        0.99,
        StopRiskParams::new(229.7, 79.1).unwrap(),
        3,
        0.05,
    )
    .unwrap()
}

fn flagship_config() -> DesignConfig {
    DesignConfig::new(
        Hypotheses::new(0.52, 0.48).unwrap(),
        (1..=60).map(|i| i * 10).collect(),
        CostModel::affine(1000.0, 10.0),
        0.5,
        StopRiskParams::new(44_000.0, 44_000.0).unwrap(),
        15,
        0.1,
    )
    .unwrap()
}

fn bench_design(c: &mut Criterion) {
    let mut group = c.benchmark_group("design");
    let screening = screening_config();
    group.bench_function("screening", |b| {
        b.iter(|| niod(black_box(&screening)).unwrap())
    });
    let flagship = flagship_config();
    group.sample_size(20);
    group.bench_function("flagship", |b| {
        b.iter(|| niod(black_box(&flagship)).unwrap())
    });
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let screening = screening_config();
    let small = niod(&screening).unwrap();
    let flagship = flagship_config();
    let big = niod(&flagship).unwrap();

    let mut group = c.benchmark_group("evaluate");
    group.bench_function("exact/screening", |b| {
        b.iter(|| profile(black_box(&small), screening.cost(), EvalMethod::Exact, &[]).unwrap())
    });
    group.bench_function("grid/screening", |b| {
        b.iter(|| profile(black_box(&small), screening.cost(), EvalMethod::Grid, &[]).unwrap())
    });
    group.bench_function("grid/flagship", |b| {
        b.iter(|| profile(black_box(&big), flagship.cost(), EvalMethod::Grid, &[]).unwrap())
    });
    group.bench_function("simulate-10k/screening", |b| {
        b.iter(|| simulate(black_box(&small), 0.3, screening.cost(), 10_000, 7).unwrap())
    });
    // a single exact pass over the flagship plan costs seconds, so keep the
    // sample small and the time budget explicit
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(60));
    group.bench_function("exact/flagship", |b| {
        b.iter(|| profile(black_box(&big), flagship.cost(), EvalMethod::Exact, &[]).unwrap())
    });
    group.finish();
}

fn bench_fixed_sample(c: &mut Criterion) {
    let hyp = Hypotheses::new(0.52, 0.48).unwrap();
    c.bench_function("fixed-sample/0.52-0.48", |b| {
        b.iter(|| np_min_sample_size(black_box(&hyp), 0.05, 0.05, 100_000).unwrap())
    });
}

criterion_group!(benches, bench_design, bench_evaluate, bench_fixed_sample);
criterion_main!(benches);
