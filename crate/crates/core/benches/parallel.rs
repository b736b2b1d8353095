use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_peakload::market::MarketInstance;
use robust_peakload::par::Parallelism;
use robust_peakload::subsidy::{self, SubsidyOptions};
use robust_peakload::{random, robustcore};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn instance() -> MarketInstance {
    random::elastic_market(&mut ChaCha8Rng::seed_from_u64(42), 3, 2)
}

fn certificate(c: &mut Criterion) {
    let inst = instance();
    let mut group = c.benchmark_group("adjustable_certificate");
    group.sample_size(20);
    for samples in [64, 512] {
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, samples), &samples, |b, &s| {
                b.iter(|| robustcore::adjustable_certificate(&inst, s, 7, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn subsidies(c: &mut Criterion) {
    let inst = instance();
    let mut group = c.benchmark_group("compute_subsidies");
    group.sample_size(20);
    for (name, mode) in MODES {
        let opts = SubsidyOptions {
            audit_samples: 1024,
            seed: 7,
            parallelism: mode,
        };
        group.bench_function(name, |b| b.iter(|| subsidy::compute_subsidies(&inst, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, certificate, subsidies);
criterion_main!(benches);
