//! Sliding-window vs dense attention throughput across sequence lengths.

use causecat_core::encoder::{full_attention, sliding_window_attention, AttentionConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn window_mask(n: usize, window: usize) -> Array2<bool> {
    let half = window / 2;
    Array2::from_shape_fn((n, n), |(i, j)| i.abs_diff(j) <= half)
}

fn bench_attention(c: &mut Criterion) {
    let mut group = c.benchmark_group("attention");
    let d_k = 16;
    let window = 8;
    for &n in &[128usize, 256, 512, 1024, 2048] {
        let mut rng = StdRng::seed_from_u64(n as u64);
        let q = random_matrix(&mut rng, n, d_k);
        let k = random_matrix(&mut rng, n, d_k);
        let v = random_matrix(&mut rng, n, d_k);
        let config = AttentionConfig {
            window,
            dilation: 1,
            global_positions: Default::default(),
            max_len: n.max(2),
            heads: 1,
        };
        group.bench_with_input(BenchmarkId::new("sliding_window", n), &n, |b, _| {
            b.iter(|| sliding_window_attention(&q, &k, &v, &config, n));
        });
        let mask = window_mask(n, window);
        group.bench_with_input(BenchmarkId::new("dense_masked", n), &n, |b, _| {
            b.iter(|| full_attention(&q, &k, &v, &mask).expect("dense attention"));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_attention);
criterion_main!(benches);
