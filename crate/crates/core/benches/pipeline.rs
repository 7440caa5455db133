use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use satpose::bench::{default_landmarks, generate_scenes, run_benchmark, SceneConfig};
use satpose::exec::Execution;
use satpose::pnp::{p3p, ransac_pnp, RansacConfig};
use satpose::refine::{sa_lmpe, AnnealSchedule};
use satpose::Camera;

fn scenes(n: usize) -> SceneConfig {
    SceneConfig {
        n_scenes: n,
        ..SceneConfig::default()
    }
}

fn benchmark_modes(c: &mut Criterion) {
    let lm = default_landmarks();
    let camera = Camera::default();
    let mut group = c.benchmark_group("run_benchmark");
    group.sample_size(10);
    for n in [100, 1000] {
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| {
                    run_benchmark(
                        &scenes(n),
                        &lm,
                        &camera,
                        &RansacConfig::default(),
                        &AnnealSchedule::default(),
                        exec,
                    )
                    .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let lm = default_landmarks();
    let camera = Camera::default();
    let scene = generate_scenes(&scenes(1), &lm, &camera, Execution::Sequential)
        .unwrap()
        .remove(0);
    let visible: Vec<_> = scene.correspondences.iter().copied().filter(|c| c.visible).collect();
    let init = ransac_pnp(&scene.correspondences, &lm, &camera, &RansacConfig::default()).unwrap();

    c.bench_function("p3p", |b| b.iter(|| p3p(black_box(&visible[..3]), &lm, &camera)));
    c.bench_function("ransac_pnp", |b| {
        b.iter(|| ransac_pnp(black_box(&scene.correspondences), &lm, &camera, &RansacConfig::default()))
    });
    c.bench_function("sa_lmpe", |b| {
        b.iter(|| sa_lmpe(black_box(&visible), &lm, &camera, &init.pose, &AnnealSchedule::default()))
    });
}

criterion_group!(benches, benchmark_modes, kernels);
criterion_main!(benches);
