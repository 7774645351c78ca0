use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use debias_core::data::{generate, synthesize_glyphs, DatasetConfig};
use debias_core::metrics::{evaluate, predict_dataset};
use debias_core::model::{Mlp, DEFAULT_HIDDEN};
use debias_core::par::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn paths() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn evaluation(c: &mut Criterion) {
    let (tr, te) = synthesize_glyphs(&DatasetConfig::glyphs(400, 2000, 1)).unwrap();
    let mut cfg = DatasetConfig::multi_color(0.99, 0.95, 1);
    cfg.train_count = 400;
    cfg.test_count = 2000;
    let test = generate(&tr, &te, &cfg).unwrap().test;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let classifier = Mlp::<f32>::classifier(&DEFAULT_HIDDEN, &mut rng);
    let discoverer = Mlp::<f32>::discoverer(&DEFAULT_HIDDEN, &mut rng);

    let mut group = c.benchmark_group("predict_2000");
    for (name, exec) in paths() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| predict_dataset(black_box(&classifier), &test, exec))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("evaluate_2000");
    for (name, exec) in paths() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate(black_box(&classifier), Some(&discoverer), &test, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = evaluation
}
criterion_main!(benches);
