use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;

use activepos::neural::{init_model, ModelArch};
use activepos::scene::{build_scene, generate_pool_with, SceneConfig};
use activepos::selection::select_genie;
use activepos::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn pool_generation(c: &mut Criterion) {
    let scene = build_scene(SceneConfig::default()).unwrap();
    let mut group = c.benchmark_group("generate_pool");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 5000), &exec, |b, &exec| {
            b.iter(|| generate_pool_with(&scene, black_box(5000), 7, exec))
        });
    }
    group.finish();
}

fn batch_inference(c: &mut Criterion) {
    let model = init_model(ModelArch::locator(18), 3).unwrap();
    let x = Array2::from_shape_fn((20_000, 18), |(i, j)| ((i * 31 + j * 7) % 97) as f64 / 97.0 - 0.5);
    let mut group = c.benchmark_group("locator_predict");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, x.nrows()), &exec, |b, &exec| {
            b.iter(|| model.predict(black_box(&x), exec).unwrap())
        });
    }
    group.finish();
}

fn genie_selection(c: &mut Criterion) {
    let scene = build_scene(SceneConfig::default()).unwrap();
    let candidates = generate_pool_with(&scene, 1700, 11, Execution::Parallel);
    let locator = activepos::neural::Locator {
        model: init_model(ModelArch::locator(18), 5).unwrap(),
        normalizer: activepos::neural::fit_normalizer(&candidates, &scene).unwrap(),
    };
    let mut group = c.benchmark_group("select_genie");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 1700), &exec, |b, &exec| {
            b.iter(|| select_genie(&locator, &candidates, 170, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pool_generation, batch_inference, genie_selection);
criterion_main!(benches);
