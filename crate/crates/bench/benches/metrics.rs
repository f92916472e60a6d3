use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pqr_core::{auc, logloss};

fn scores(n: usize) -> (Vec<f64>, Vec<f64>) {
    // deterministic, tie-heavy scores
    let s = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let y = (0..n)
        .map(|i| if (i * 31) % 5 < 2 { 1.0 } else { -1.0 })
        .collect();
    (s, y)
}

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [1_000, 100_000] {
        let (s, y) = scores(n);
        group.bench_with_input(BenchmarkId::new("auc", n), &n, |b, _| {
            b.iter(|| auc(black_box(&s), &y).unwrap())
        });
        let p: Vec<f64> = s.iter().map(|v| 0.01 + 0.98 * v).collect();
        let y01: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        group.bench_with_input(BenchmarkId::new("logloss", n), &n, |b, _| {
            b.iter(|| logloss(black_box(&p), &y01).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, metrics);
criterion_main!(benches);
