use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdens_bench::{fbm_model, sup_spec};
use mdens_core::density::density_from_g;
use mdens_core::gest::{draw_g_samples, regress_g, z_grid};
use mdens_core::model::CovarianceMatrix;
use mdens_core::GridPolicy;
use std::hint::black_box;

fn cholesky(c: &mut Criterion) {
    let mut group = c.benchmark_group("cholesky");
    for n in [128usize, 512] {
        let k = fbm_model(0.75, n).kernel().clone();
        group.bench_with_input(BenchmarkId::from_parameter(n), &k, |b, k| {
            b.iter(|| CovarianceMatrix::new(black_box(k.clone())).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let model = fbm_model(0.75, 256);
    let spec = sup_spec(&model);
    let mut group = c.benchmark_group("g_samples");
    group.sample_size(10);
    group.bench_function("sup_fbm256_10k", |b| {
        b.iter(|| draw_g_samples(&spec, &model, black_box(10_000), 3).unwrap())
    });
    group.finish();
}

fn regression_and_density(c: &mut Criterion) {
    let model = fbm_model(0.75, 128);
    let spec = sup_spec(&model);
    let samples = draw_g_samples(&spec, &model, 100_000, 5).unwrap();
    let grid = z_grid(&samples.z, GridPolicy::default()).unwrap();
    c.bench_function("regress_g_100k_401", |b| {
        b.iter(|| regress_g(black_box(&samples), &grid, None).unwrap())
    });
    let est = regress_g(&samples, &grid, None).unwrap();
    c.bench_function("density_from_g_401", |b| {
        b.iter(|| density_from_g(black_box(&est), spec.centering.abs_mean).unwrap())
    });
}

criterion_group!(benches, cholesky, sampling, regression_and_density);
criterion_main!(benches);
