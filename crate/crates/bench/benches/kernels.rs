use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use delab_bench::random_spd;
use delab_core::harness::{child_rng, run_replication};
use delab_core::limits::{integral_test_partial_sums, PhiFamily};
use delab_core::matrix::psd_sqrt;
use delab_core::models::{FamilyId, SpecConfig};
use delab_core::special::gamma_q;
use delab_core::{ExperimentConfig, Mode};

fn matrix_sqrt(c: &mut Criterion) {
    let mut g = c.benchmark_group("psd_sqrt");
    for d in [1, 2, 4, 8] {
        let m = random_spd(d, 1);
        g.bench_with_input(BenchmarkId::from_parameter(d), &m, |b, m| b.iter(|| psd_sqrt(black_box(m)).unwrap()));
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_1000");
    let ladder = SpecConfig { c: Some(0.5), ..SpecConfig::family(FamilyId::AtomLadder, 1) };
    for cfg in [SpecConfig::family(FamilyId::GaussianIso, 1), SpecConfig::family(FamilyId::UniformCube, 1), ladder] {
        let spec = cfg.build().unwrap();
        g.bench_function(cfg.family.name(), |b| {
            let mut rng = child_rng(1, 0);
            b.iter(|| (0..1000).map(|_| spec.sample(&mut rng)[0]).sum::<f64>())
        });
    }
    g.finish();
}

fn replication(c: &mut Criterion) {
    let mut g = c.benchmark_group("replication_n10000");
    g.sample_size(20);
    for (mode, d) in [(Mode::Classical, 1), (Mode::Classical, 2), (Mode::SelfNormalized, 2), (Mode::Feller, 1)] {
        let cfg = ExperimentConfig::new(SpecConfig::family(FamilyId::GaussianIso, d), mode, 10_000, 1, 1);
        g.bench_function(format!("{}_d{d}", mode.name()), |b| b.iter(|| run_replication(&cfg, 0).unwrap()));
    }
    g.finish();
}

fn special(c: &mut Criterion) {
    c.bench_function("gamma_q", |b| b.iter(|| gamma_q(black_box(1.5), black_box(7.25)).unwrap()));
}

fn integral_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("integral_test_oracle");
    g.sample_size(10);
    let phi = PhiFamily::new(4.0, 2.0, 2).unwrap();
    g.bench_function("n_max_1e9", |b| b.iter(|| integral_test_partial_sums(&phi, 1_000_000_000).unwrap()));
    g.finish();
}

criterion_group!(benches, matrix_sqrt, sampling, replication, special, integral_oracle);
criterion_main!(benches);
