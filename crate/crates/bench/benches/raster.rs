use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splat_adc::io::initial_scene;
use splat_adc::io::synthetic::{blobs3d, checker2d, Blobs3d, Checker2d};
use splat_adc::losses::photometric_loss_with_grad;
use splat_adc::{backward, render, Dataset, Decoder, InitSpec, PixelGradients, RenderSettings, TrainConfig, Trainer};

fn textured() -> Dataset {
    checker2d(&Checker2d {
        width: 96,
        height: 96,
        cell: 6,
        noise_amplitude: 0.5,
        noise_scale: 3.0,
        views: 2,
        seed: 1,
    })
    .dataset
}

fn raster_2d(c: &mut Criterion) {
    let ds = textured();
    let settings = RenderSettings::default();
    let mut g = c.benchmark_group("raster_2d_96");
    for n in [16usize, 32, 64] {
        let scene = initial_scene(&InitSpec::Grid { nx: n, ny: n }, &ds, 0).unwrap();
        let cam = &ds.views[0].camera;
        g.bench_with_input(BenchmarkId::new("forward", n * n), &scene, |b, s| {
            b.iter(|| render(black_box(s), cam, Decoder::Rgb, &settings).unwrap())
        });
        let out = render(&scene, cam, Decoder::Rgb, &settings).unwrap();
        let up = vec![1e-3; out.image.data.len()];
        let err = vec![0.5; cam.pixel_count()];
        g.bench_with_input(BenchmarkId::new("backward", n * n), &scene, |b, s| {
            b.iter(|| {
                backward(
                    black_box(s),
                    cam,
                    &out,
                    &PixelGradients {
                        image: Some(&up),
                        transmittance: None,
                        error: Some(&err),
                    },
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn raster_3d(c: &mut Criterion) {
    let data = blobs3d(&Blobs3d {
        width: 64,
        height: 64,
        primitives: 500,
        ..Blobs3d::default()
    })
    .unwrap();
    let scene = data.ground_truth.unwrap();
    let cam = &data.dataset.views[0].camera;
    let settings = RenderSettings::default();
    c.bench_function("raster_3d_64/forward/500", |b| b.iter(|| render(black_box(&scene), cam, Decoder::Rgb, &settings).unwrap()));
}

fn losses(c: &mut Criterion) {
    let ds = textured();
    let scene = initial_scene(&InitSpec::Grid { nx: 16, ny: 16 }, &ds, 0).unwrap();
    let out = render(&scene, &ds.views[0].camera, Decoder::Rgb, &RenderSettings::default()).unwrap();
    let target = &ds.views[0].target;
    c.bench_function("photometric_96/loss_and_grad", |b| {
        b.iter(|| photometric_loss_with_grad(black_box(&out.image), target, 0.2).unwrap())
    });
}

fn train_step(c: &mut Criterion) {
    let ds = textured();
    let scene = initial_scene(&InitSpec::Grid { nx: 16, ny: 16 }, &ds, 0).unwrap();
    let mut cfg = TrainConfig {
        total_iterations: 1_000_000,
        ..TrainConfig::default()
    };
    cfg.adc.densify_interval = 0;
    let mut t = Trainer::new(scene, &ds, &cfg, Box::new(std::io::sink())).unwrap();
    c.bench_function("train_step_96/256", |b| b.iter(|| t.step().unwrap()));
}

criterion_group!(benches, raster_2d, raster_3d, losses, train_step);
criterion_main!(benches);
