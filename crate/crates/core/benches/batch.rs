use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drf::par::Execution;
use drf::primitive::{train_exemplar_quantizer, Primitive};
use drf::sample::{Sample, Shape, DEFAULT_GRID};
use drf::set::FiniteSet;
use drf::verify::check_latent_set;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn random_samples(seed: u64, n: usize, d: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::vector(d).unwrap();
    (0..n)
        .map(|_| Sample::new(shape.clone(), (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
        .collect()
}

fn encode_batch(c: &mut Criterion) {
    let d = 16;
    let train = random_samples(1, 2000, d);
    let set = FiniteSet::from_samples(Shape::vector(d).unwrap(), DEFAULT_GRID, train).unwrap();
    let cb = train_exemplar_quantizer(&set, 0.9, set.shape()).unwrap();
    let queries = random_samples(2, 10_000, d);
    let mut group = c.benchmark_group("encode_batch");
    group.sample_size(20);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, cb.archetype_count()), &mode, |b, &mode| {
            b.iter(|| black_box(cb.encode_batch_with(&queries, mode).unwrap()))
        });
    }
    group.finish();
}

fn latent_sweep(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..64).collect();
    let trial = |&seed: &u64| {
        let samples = random_samples(seed, 150, 3);
        let set = FiniteSet::from_samples(Shape::vector(3).unwrap(), DEFAULT_GRID, samples).unwrap();
        let cb = train_exemplar_quantizer(&set, 0.2, set.shape()).unwrap();
        check_latent_set(&set, &cb, "bench").passed
    };
    let mut group = c.benchmark_group("latent_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, seeds.len()), &mode, |b, &mode| {
            b.iter(|| black_box(mode.map(&seeds, trial)))
        });
    }
    group.finish();
}

criterion_group!(benches, encode_batch, latent_sweep);
criterion_main!(benches);
