use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polarlab_core::geometry::GridSpec;
use polarlab_core::labs::estimate_hitting_probability;
use polarlab_core::linalg::{cholesky, eigvals_herm, eigvals_sym};
use polarlab_core::sampler::covariance_matrix;
use polarlab_core::{
    HermMatrix, JitterPolicy, Kernel, Rectangle, RngSeed, Sampler, SymMatrix, TargetSet,
};

fn bench_cholesky(c: &mut Criterion) {
    let mut group = c.benchmark_group("cholesky_fbm");
    for n in [64, 256, 1024] {
        let grid = GridSpec::interval(1.0, 2.0, n).unwrap();
        let cov = covariance_matrix(&Kernel::fbm(0.4, 1).unwrap(), &grid.points()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &cov, |b, cov| {
            b.iter(|| cholesky(black_box(cov), &JitterPolicy::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_eigvals(c: &mut Criterion) {
    let sym = SymMatrix::from_fn(32, |i, j| {
        1.0 / (1.0 + i as f64 + j as f64) + if i == j { i as f64 } else { 0.0 }
    });
    c.bench_function("eigvals_sym_32", |b| {
        b.iter(|| eigvals_sym(black_box(&sym)).unwrap())
    });
    let n = 16;
    let re: Vec<f64> = (0..n * n).map(|k| ((k / n + k % n) as f64).cos()).collect();
    let im: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (i as f64 - j as f64) * 0.1
        })
        .collect();
    let herm = HermMatrix::new(n, re, im).unwrap();
    c.bench_function("eigvals_herm_16", |b| {
        b.iter(|| eigvals_herm(black_box(&herm)).unwrap())
    });
}

fn bench_sample_field(c: &mut Criterion) {
    let kernel = Kernel::fbs(&[0.3, 0.7]).unwrap();
    let rect = Rectangle::cube(1.0, 2.0, 2).unwrap();
    let grid = GridSpec::new(rect, vec![32, 32]).unwrap();
    let kron = Sampler::new(&kernel, &grid).unwrap();
    let dense = Sampler::dense(&kernel, &grid).unwrap();
    let mut group = c.benchmark_group("sample_fbs_32x32");
    let mut r = 0u64;
    group.bench_function("kronecker", |b| {
        b.iter(|| {
            r += 1;
            kron.sample(1, RngSeed::new(1).replicate(r)).unwrap()
        })
    });
    group.bench_function("dense", |b| {
        b.iter(|| {
            r += 1;
            dense.sample(1, RngSeed::new(1).replicate(r)).unwrap()
        })
    });
    group.finish();

    let bm_grid = GridSpec::interval(1.0, 2.0, 4097).unwrap();
    let bm = Sampler::new(&Kernel::bm(), &bm_grid).unwrap();
    c.bench_function("sample_bm_4097", |b| {
        b.iter(|| {
            r += 1;
            bm.sample(1, RngSeed::new(2).replicate(r)).unwrap()
        })
    });
}

fn bench_hitting(c: &mut Criterion) {
    let grid = GridSpec::interval(1.0, 2.0, 513).unwrap();
    let target = TargetSet::point(vec![0.0]).unwrap();
    let mut group = c.benchmark_group("hitting");
    group.sample_size(10);
    group.bench_function("bm_513_n1000", |b| {
        b.iter(|| {
            estimate_hitting_probability(&Kernel::bm(), &grid, &target, 0.01, 1000, RngSeed::new(3))
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_cholesky,
    bench_eigvals,
    bench_sample_field,
    bench_hitting
);
criterion_main!(benches);
