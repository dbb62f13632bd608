//! Rayon global pool against a one-thread pool on the two data-parallel
//! hot spots: bootstrap ROC resampling and batched encoder features.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array3;
use rand::Rng as _;
use rand_distr::StandardNormal;

use uda_core::evaluation::bootstrap_roc;
use uda_core::nn::{Encoder, EncoderConfig};
use uda_core::rng::rng_from;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn bootstrap(c: &mut Criterion) {
    let mut rng = rng_from(1);
    let labels: Vec<bool> = (0..500).map(|i| i % 3 == 0).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&y| y as u8 as f64 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut g = c.benchmark_group("bootstrap_roc_200");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| bootstrap_roc(&scores, &labels, 200, 7).unwrap()))
        });
    }
    g.finish();
}

fn encoder_features(c: &mut Criterion) {
    let enc = Encoder::new(EncoderConfig::desk(), 3).unwrap();
    let [x, y, z] = enc.config().input_shape;
    let mut rng = rng_from(2);
    let vols: Vec<Array3<f32>> = (0..8)
        .map(|_| Array3::from_shape_simple_fn((x, y, z), || rng.sample(StandardNormal)))
        .collect();
    let refs: Vec<&Array3<f32>> = vols.iter().collect();
    let mut g = c.benchmark_group("encoder_features_8");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| enc.features(&refs).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bootstrap, encoder_features);
criterion_main!(benches);
