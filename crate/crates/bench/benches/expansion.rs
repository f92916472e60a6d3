use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pqr_bench::{click_stream, top_k_map};
use pqr_core::ExpandedVector;

fn expand(c: &mut Criterion) {
    let data = click_stream(10_000);
    let mut group = c.benchmark_group("expand");
    group.throughput(Throughput::Elements(data.len() as u64));
    for k in [0, 100, 1000] {
        let map = top_k_map(&data, k);
        group.bench_with_input(BenchmarkId::from_parameter(k), &map, |b, map| {
            let mut out = ExpandedVector::new();
            let mut scratch = Vec::new();
            b.iter(|| {
                for inst in &data {
                    map.expand_into(&inst.features, &mut out, &mut scratch).unwrap();
                    black_box(out.nnz());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, expand);
criterion_main!(benches);
