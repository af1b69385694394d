use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;

use diffhash::hashcodec;
use diffhash_bench::random_codes;

fn bench_hamming(c: &mut Criterion) {
    let codes = random_codes(2, 512, 1);
    c.bench_function("hamming_512", |b| {
        b.iter(|| hashcodec::hamming(black_box(&codes[0]), black_box(&codes[1])).unwrap())
    });
}

fn bench_knn(c: &mut Criterion) {
    let db = random_codes(100_000, 512, 2);
    let query = random_codes(1, 512, 3).pop().unwrap();
    let mut group = c.benchmark_group("knn");
    group.throughput(Throughput::Elements(db.len() as u64));
    group.sample_size(20);
    group.bench_function("k10_over_100k_m512", |b| {
        b.iter(|| hashcodec::knn(black_box(&query), black_box(&db), 10).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_hamming, bench_knn);
criterion_main!(benches);
