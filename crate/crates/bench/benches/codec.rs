//! Codec benchmarks: deterministic k-means training, patch quantization
//! and the entropy estimate.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use healpipe_core::codec::{quantize, shannon_entropy, train_codebook};
use healpipe_core::rng::SplitMix64;

fn bench_training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_codebook_2048x64");
    group.sample_size(10);
    let mut rng = SplitMix64::new(3);
    let patches: Vec<f64> = (0..2048 * 64).map(|_| rng.next_gaussian()).collect();
    for &n in &[64usize, 256] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| train_codebook(&patches, 64, n, 99).unwrap());
        });
    }
    group.finish();
}

fn bench_quantize(c: &mut Criterion) {
    let mut rng = SplitMix64::new(4);
    let patches: Vec<f64> = (0..1024 * 64).map(|_| rng.next_gaussian()).collect();
    let codebook = train_codebook(&patches, 64, 256, 5).unwrap();
    let tile: Vec<f64> = (0..256 * 256).map(|_| rng.next_gaussian()).collect();

    c.bench_function("quantize_tile_256_patch8_n256", |b| {
        b.iter(|| quantize(&tile, 1, 256, 8, &codebook).unwrap());
    });
}

fn bench_entropy(c: &mut Criterion) {
    let mut rng = SplitMix64::new(6);
    let map: Vec<u32> = (0..36 * 36).map(|_| rng.next_range(8192) as u32).collect();
    c.bench_function("shannon_entropy_36x36", |b| {
        b.iter(|| shannon_entropy(&map));
    });
}

criterion_group!(benches, bench_training, bench_quantize, bench_entropy);
criterion_main!(benches);
