use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gaze3d::coordmap::encode_point;
use gaze3d::geometry::ray_cast;
use gaze3d::rasterizer::{rasterize_coordmap, FrameSpec};
use gaze3d::saliency::gaussian_blur3d;
use gaze3d_bench::{blob, camera, impulses, scale};

fn rasterize(c: &mut Criterion) {
    let mesh = blob();
    let scale = scale(&mesh);
    let frame = FrameSpec::identity(0);
    for size in [256, 512] {
        let cam = camera(size);
        c.bench_function(&format!("rasterize blob {size}x{size}"), |b| {
            b.iter(|| rasterize_coordmap(black_box(&mesh), &cam, &frame, &scale).unwrap())
        });
    }
}

fn blur(c: &mut Criterion) {
    for n in [32, 64] {
        let grid = impulses(n);
        c.bench_function(&format!("gaussian blur {n}^3 sigma 2"), |b| {
            b.iter(|| gaussian_blur3d(black_box(&grid), 2.0).unwrap())
        });
    }
}

fn encode(c: &mut Criterion) {
    let mesh = blob();
    let scale = scale(&mesh);
    c.bench_function("encode blob vertices", |b| {
        b.iter(|| {
            mesh.vertices()
                .iter()
                .map(|&p| encode_point(black_box(p), &scale).unwrap()[0] as u64)
                .sum::<u64>()
        })
    });
}

fn ray(c: &mut Criterion) {
    let mesh = blob();
    let cam = camera(512);
    c.bench_function("ray cast 64 pixels", |b| {
        b.iter(|| {
            (0..64)
                .filter_map(|i| ray_cast(&mesh, &cam, 192.5 + 2.0 * i as f64, 256.5))
                .map(|h| h.point.norm())
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, rasterize, blur, encode, ray);
criterion_main!(benches);
