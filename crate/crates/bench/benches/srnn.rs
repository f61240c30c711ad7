use std::hint::black_box;

use arxflow_bench::srnn_case;
use criterion::{criterion_group, criterion_main, Criterion};

fn srnn(c: &mut Criterion) {
    let (model, seq) = srnn_case(500, 10, 4);
    let rows: Vec<usize> = (0..seq.len()).collect();
    let mut group = c.benchmark_group("srnn");
    group.bench_function("jacobian", |b| {
        b.iter(|| model.jacobian(black_box(&seq), &rows).unwrap())
    });
    group.bench_function("bptt gradient", |b| {
        b.iter(|| model.gradient(black_box(&seq), None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, srnn);
criterion_main!(benches);
