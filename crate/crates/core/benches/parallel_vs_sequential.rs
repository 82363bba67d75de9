use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use posprobe_core::embeddings::Pca;
use posprobe_core::model::{batch_gradients, build_examples, parse_treebank, Decoder, EncoderConfig, HeadConfig, ModelConfig, ModelState};
use posprobe_core::parallel::Exec;
use posprobe_core::synthetic::{generate, SyntheticConfig, SyntheticTreebank};
use posprobe_core::vocab::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn data() -> SyntheticTreebank {
    generate(
        &SyntheticConfig {
            train: 60,
            dev: 60,
            test: 10,
            ..SyntheticConfig::default()
        },
        3,
    )
    .unwrap()
}

fn parser(data: &SyntheticTreebank) -> ModelState {
    let encoder = EncoderConfig {
        word_dim: 32,
        char_dim: 32,
        char_lstm_input: 16,
        char_lstm_size: 32,
        lstm_layers: 2,
        lstm_size: 64,
        ..EncoderConfig::default()
    };
    let model = ModelConfig::parser(encoder, HeadConfig::default());
    ModelState::new(model, Vocabulary::build(&data.train).unwrap(), None, 1).unwrap()
}

fn gradients(c: &mut Criterion) {
    let data = data();
    let state = parser(&data);
    let examples = build_examples(&state, &data.train, None).unwrap();
    let batch: Vec<_> = examples.iter().take(30).collect();
    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(batch_gradients(&state, &batch, Some(1), exec)))
        });
    }
    group.finish();
}

fn decoding(c: &mut Criterion) {
    let data = data();
    let state = parser(&data);
    let mut group = c.benchmark_group("parse_treebank");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(parse_treebank(&state, &data.dev, None, Decoder::Mst, exec).unwrap()))
        });
    }
    group.finish();
}

fn pca(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vectors = Array2::from_shape_fn((20_000, 64), |_| rng.random_range(-1.0..1.0));
    let mut group = c.benchmark_group("pca_fit");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(Pca::fit(&vectors, 16, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, gradients, decoding, pca);
criterion_main!(benches);
