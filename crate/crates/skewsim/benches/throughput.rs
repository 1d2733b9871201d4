//! Sequential vs parallel throughput on the three hot loops: exact-step sign
//! sampling, occupation accumulation on the natural diffusion, and the
//! lattice walk. On a single-core host the parallel numbers should sit at
//! sequential plus scheduler overhead; on a multi-core host they should
//! scale until the batch is too small to amortize the fork.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skewsim::batch::Parallelism;
use skewsim::model::{InterfaceModel, MediumSpec, SkewParam};
use skewsim::occupation::{batch_occupation, sign_probability};
use skewsim::path::Scheme;
use skewsim::sampler::{simulate_skew_walk, WalkConfig};

const MODES: [(&str, Parallelism); 2] =
    [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn bench_sign_probability(c: &mut Criterion) {
    let alpha = SkewParam::new(2.0 / 3.0).unwrap();
    let mut group = c.benchmark_group("sign_probability_200x500");
    for (label, par) in MODES {
        group.bench_function(label, |b| {
            b.iter(|| {
                let est =
                    sign_probability(alpha, 0.5, 1e-3, 200, 0xBE01, Scheme::ExactStep, par)
                        .unwrap();
                black_box(est.value)
            })
        });
    }
    group.finish();
}

fn bench_occupation(c: &mut Criterion) {
    let model = InterfaceModel::physical(MediumSpec::new(1.0, 4.0).unwrap());
    let mut group = c.benchmark_group("occupation_200x500");
    for (label, par) in MODES {
        group.bench_function(label, |b| {
            b.iter(|| {
                let report = batch_occupation(&model, 0.5, 1e-3, 200, 0xBE02, Scheme::ExactStep, par)
                    .unwrap();
                black_box(report.gamma_plus.value)
            })
        });
    }
    group.finish();
}

fn bench_lattice_walk(c: &mut Criterion) {
    let alpha = SkewParam::new(0.7).unwrap();
    let cfg = WalkConfig::new(0.02, 1_000).unwrap();
    let mut group = c.benchmark_group("lattice_walk_100x1000");
    for (label, par) in MODES {
        group.bench_function(label, |b| {
            b.iter(|| {
                let sum: f64 = skewsim::batch::run_batch(100, par, |i| {
                    simulate_skew_walk(alpha, &cfg, 0xBE03, i).unwrap().endpoint()
                })
                .iter()
                .sum();
                black_box(sum)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sign_probability, bench_occupation, bench_lattice_walk);
criterion_main!(benches);
