use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use flowlab_core::bounds::{ball_diameter_bound_opt, BallParams};
use flowlab_core::experiments::{chaining_exact_check, quarter_grid};
use flowlab_core::geometry::cover_sphere;
use flowlab_core::{evolve, FlowModel, NoiseSource, PointCloud};

fn noise(c: &mut Criterion) {
    let src = NoiseSource::new(7, 4, 1e-3).unwrap();
    c.bench_function("noise/1000 increments", |b| {
        b.iter(|| (0..1000).map(|k| src.increment(1, black_box(k)).unwrap()).sum::<f64>())
    });
    let coarse = src.coarsened(10);
    c.bench_function("noise/coarsened 100 increments", |b| {
        b.iter(|| (0..100).map(|k| coarse.increment(1, black_box(k)).unwrap()).sum::<f64>())
    });
}

fn integrator(c: &mut Criterion) {
    let model = FlowModel::radial2d(-1.0, 3.0, 0.5, 0.1).unwrap();
    let src = NoiseSource::new(3, model.field_count(), 1e-3).unwrap();
    let side: Vec<Vec<f64>> = (0..64).map(|i| vec![1.0 + (i % 8) as f64 * 0.01, (i / 8) as f64 * 0.01]).collect();
    let cloud = PointCloud::from_points(&side).unwrap();
    c.bench_function("evolve/radial2d 64 points x 1000 steps", |b| {
        b.iter_batched(
            || cloud.clone(),
            |mut p| {
                evolve(&model, &mut p, 0, 1000, &src).unwrap();
                p
            },
            BatchSize::SmallInput,
        )
    });
    let line = FlowModel::mult1d(0.0, 1.0).unwrap();
    let src1 = NoiseSource::new(3, 1, 1e-3).unwrap();
    let one = PointCloud::new(1, vec![1.0]).unwrap();
    c.bench_function("evolve/mult1d 1 point x 1000 steps", |b| {
        b.iter_batched(
            || one.clone(),
            |mut p| {
                evolve(&line, &mut p, 0, 1000, &src1).unwrap();
                p
            },
            BatchSize::SmallInput,
        )
    });
}

fn bounds_and_geometry(c: &mut Criterion) {
    let p = BallParams {
        xi: 1e-3,
        t: 1.0,
        u: 0.1,
        c_bar: 2.0,
        lambda: 0.0,
        sigma: 1.0,
        d: 2,
    };
    c.bench_function("bounds/ball diameter optimizer", |b| b.iter(|| ball_diameter_bound_opt(black_box(&p))));
    c.bench_function("geometry/cover sphere d=3", |b| b.iter(|| cover_sphere(3, black_box(10.0), 0.5).unwrap()));
    c.bench_function("chaining/8-step enumeration", |b| b.iter(|| chaining_exact_check(8, &quarter_grid(8)).unwrap()));
}

criterion_group!(benches, noise, integrator, bounds_and_geometry);
criterion_main!(benches);
