use std::hint::black_box;

use blocktoep::asymptotics::{gaussian_draw, genericity_check};
use blocktoep::fixtures::{example_coefficients, example_perturbation};
use blocktoep::limitsets::{limit_spectrum, scan_grid, LimitSpectrumOptions, Region};
use blocktoep::operators::circulant_spectrum_fft;
use blocktoep::Parallelism;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn grid_scan(c: &mut Criterion) {
    let m = example_coefficients();
    let mut group = c.benchmark_group("scan_grid");
    group.sample_size(10);
    for n in [64, 128] {
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| scan_grid(black_box(&m), Region::square(3.0), n, n, 1, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn limit_set_pipeline(c: &mut Criterion) {
    let m = example_coefficients();
    let bd = example_perturbation();
    let mut group = c.benchmark_group("limit_spectrum");
    group.sample_size(10);
    for (name, mode) in MODES {
        let opts = LimitSpectrumOptions {
            nx: 96,
            ny: 96,
            mode,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| limit_spectrum(black_box(&m), &bd, &opts).unwrap())
        });
    }
    group.finish();
}

fn genericity(c: &mut Criterion) {
    let mut group = c.benchmark_group("genericity_check");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| genericity_check(|rng| gaussian_draw(rng, 2, 2), 32, black_box(7), mode))
        });
    }
    group.finish();
}

fn circulant(c: &mut Criterion) {
    let m = example_coefficients();
    let mut group = c.benchmark_group("circulant_spectrum_fft");
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| circulant_spectrum_fft(black_box(&m), 4096, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    grid_scan,
    limit_set_pipeline,
    genericity,
    circulant
);
criterion_main!(benches);
