use std::hint::black_box;

use bilevel_bench::fixture;
use bilevel_core::data::Family;
use bilevel_core::prox::{project_box, project_l1_ball, prox_l1};
use bilevel_core::{pb_apg, pb_apg_sc, ApgConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array1;

fn fixed_iterations(iters: usize) -> ApgConfig {
    ApgConfig {
        max_iters: Some(iters),
        epsilon: f64::MIN_POSITIVE,
        record_every: usize::MAX,
        ..ApgConfig::default()
    }
}

fn apg(c: &mut Criterion) {
    let mut group = c.benchmark_group("pb_apg_200_iters");
    for (family, rows, cols) in [(Family::Lrp, 200, 50), (Family::Lsrp, 100, 190)] {
        let (instance, objective) = fixture(family, rows, cols, 1e5);
        let x0 = Array1::zeros(instance.dim);
        let config = fixed_iterations(200);
        group.bench_function(BenchmarkId::new("plain", format!("{family:?}")), |b| {
            b.iter(|| pb_apg(black_box(&objective), x0.view(), &config).unwrap())
        });
        let mu = objective.strong_convexity();
        if mu > 0.0 {
            group.bench_function(BenchmarkId::new("strongly_convex", format!("{family:?}")), |b| {
                b.iter(|| pb_apg_sc(black_box(&objective), mu, x0.view(), &config).unwrap())
            });
        }
    }
    group.finish();
}

fn prox(c: &mut Criterion) {
    let mut group = c.benchmark_group("prox");
    for n in [100, 10_000] {
        let y = Array1::from_shape_fn(n, |i| ((i * 7919) % 1000) as f64 / 250.0 - 2.0);
        let (lo, hi) = (Array1::from_elem(n, -0.5), Array1::from_elem(n, 0.5));
        group.bench_with_input(BenchmarkId::new("l1", n), &y, |b, y| b.iter(|| prox_l1(black_box(y.view()), 0.3)));
        group.bench_with_input(BenchmarkId::new("l1_ball", n), &y, |b, y| {
            b.iter(|| project_l1_ball(black_box(y.view()), 1.0))
        });
        group.bench_with_input(BenchmarkId::new("box", n), &y, |b, y| {
            b.iter(|| project_box(black_box(y.view()), lo.view(), hi.view()))
        });
    }
    group.finish();
}

criterion_group!(benches, apg, prox);
criterion_main!(benches);
