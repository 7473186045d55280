use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uav_urllc::traffic::{fit_hyperparams, predict_next, KernelParams, TrafficWindow};

fn window(n: usize) -> TrafficWindow {
    let values: Vec<f64> =
        (0..n).map(|i| 0.5 + 0.3 * (i as f64 * 0.05).sin() + 0.01 * ((i * 37) % 11) as f64).collect();
    TrafficWindow::from_history(n, &values, n as i64 - 1).unwrap()
}

fn predict(c: &mut Criterion) {
    let params = KernelParams::default();
    let mut g = c.benchmark_group("gp_predict");
    for n in [100, 300, 600] {
        let w = window(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| predict_next(black_box(w), &params).unwrap())
        });
    }
    g.finish();
}

fn fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("gp_fit");
    g.sample_size(10);
    for n in [100, 600] {
        let w = window(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| fit_hyperparams(black_box(w)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, predict, fit);
criterion_main!(benches);
