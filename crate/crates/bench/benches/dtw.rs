use std::hint::black_box;

use arxflow_bench::walk;
use arxflow_core::clustering::{dtw_values, DtwConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn dtw(c: &mut Criterion) {
    let mut group = c.benchmark_group("dtw");
    for len in [24, 168, 720] {
        let (a, b) = (walk(len, 1), walk(len, 2));
        group.bench_with_input(BenchmarkId::new("full", len), &len, |bench, _| {
            bench.iter(|| dtw_values(black_box(&a), black_box(&b), &DtwConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("band 12", len), &len, |bench, _| {
            bench.iter(|| {
                dtw_values(black_box(&a), black_box(&b), &DtwConfig::with_window(12)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, dtw);
criterion_main!(benches);
