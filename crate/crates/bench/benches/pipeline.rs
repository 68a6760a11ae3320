use std::hint::black_box;

use bshape_bench::{box_scene, ellipse_polygon, ellipse_region};
use bshape_core::eval::evaluate;
use bshape_core::maskgen::{extract_boundary, render};
use bshape_core::raster::rasterize_polygon;
use bshape_core::reconstruct::reconstruct_instance;
use bshape_core::rle::{decode_rle, encode_rle};
use bshape_core::{IouType, MaskKind, MaskSpec, MaskVariant, ReconstructionParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn targets(c: &mut Criterion) {
    let mut group = c.benchmark_group("targets");
    for size in [128usize, 512] {
        let boundary = extract_boundary(&ellipse_region(size));
        for variant in [MaskVariant::Thick, MaskVariant::Scored] {
            let spec = MaskSpec::new(MaskKind::Bshape, variant, 7, 0.05).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{variant:?}"), size), &boundary, |b, boundary| {
                b.iter(|| render(black_box(boundary), &spec).unwrap())
            });
        }
    }
    group.finish();
}

fn rasterize(c: &mut Criterion) {
    let poly = ellipse_polygon(512, 200);
    c.bench_function("rasterize/512", |b| {
        b.iter(|| rasterize_polygon(black_box(&poly), 512, 512).unwrap())
    });
}

fn rle(c: &mut Criterion) {
    let mask = ellipse_region(512);
    let counts = encode_rle(&mask);
    c.bench_function("rle/encode/512", |b| b.iter(|| encode_rle(black_box(&mask))));
    c.bench_function("rle/decode/512", |b| {
        b.iter(|| decode_rle(black_box(&counts), 512, 512).unwrap())
    });
}

fn reconstruct(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct");
    let region = ellipse_region(128);
    let boundary = extract_boundary(&region);
    for k in [0u32, 3, 7] {
        let spec = MaskSpec::new(MaskKind::Bshape, MaskVariant::Thick, k, 0.05).unwrap();
        let target = render(&boundary, &spec).unwrap();
        let params = ReconstructionParams {
            boundary_half_thickness: k,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("k", k), &target, |b, target| {
            b.iter(|| reconstruct_instance(black_box(target), &params).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let (dets, gts) = box_scene(50, 20, 1);
    let categories: Vec<(u64, String)> = (1..=3).map(|id| (id, format!("c{id}"))).collect();
    c.bench_function("evaluate/bbox/50x20", |b| {
        b.iter(|| evaluate(black_box(&dets), black_box(&gts), &categories, IouType::Bbox).unwrap())
    });
}

criterion_group!(benches, targets, rasterize, rle, reconstruct, evaluation);
criterion_main!(benches);
