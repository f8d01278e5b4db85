use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use fraclab::paths::{FbmMethod, FbmSampler, RlMethod, RlSampler};
use fraclab::urn::{simulate, UrnParams};
use fraclab::{PathSampler, ProcessSampler, ProcessSpec, SeedSpec, TimeGrid};

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, 1.0, n).unwrap())
}

fn bench_path<S: PathSampler>(b: &mut criterion::Bencher, s: &S) {
    let seed = SeedSpec::new(1, 0);
    let mut k = 0u64;
    b.iter(|| {
        k += 1;
        black_box(s.sample(&seed, k))
    });
}

fn fbm(c: &mut Criterion) {
    let mut group = c.benchmark_group("fbm_circulant");
    for n in [1 << 10, 1 << 12, 1 << 14] {
        group.throughput(Throughput::Elements(n as u64));
        let s = FbmSampler::new(0.7, grid(n), FbmMethod::Circulant).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, bench_path);
    }
    group.finish();
}

fn rl(c: &mut Criterion) {
    let mut group = c.benchmark_group("rl_kernel");
    for n in [1 << 10, 1 << 12] {
        group.throughput(Throughput::Elements(n as u64));
        let s = RlSampler::new(0.8, grid(n), RlMethod::KernelConvolution).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, bench_path);
    }
    group.finish();
}

fn weighted(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrated_brownian_weighted");
    let spec = ProcessSpec::integrated_brownian()
        .with_weights(vec![0.5])
        .unwrap();
    for n in [1 << 10, 1 << 12] {
        group.throughput(Throughput::Elements(n as u64));
        let s = ProcessSampler::new(&spec, grid(n)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, bench_path);
    }
    group.finish();
}

fn urn(c: &mut Criterion) {
    let p = UrnParams::new(0.7, 0.4, 1.0, 1.0).unwrap();
    let seed = SeedSpec::new(1, 0);
    let mut group = c.benchmark_group("urn");
    group.throughput(Throughput::Elements(100_000));
    group.bench_function("simulate_1e5", |b| {
        b.iter(|| black_box(simulate(&p, 100_000, &seed, 0).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, fbm, rl, weighted, urn);
criterion_main!(benches);
