use bshape_core::maskgen::{extract_boundary, render};
use bshape_core::reconstruct::{components_8, fill_region, reconstruct_instance};
use bshape_core::raster::{rasterize_polygon, Point};
use bshape_core::{BinaryMask, BoundarySet, MaskKind, MaskSpec, MaskVariant, ReconstructionParams, TargetMask};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Convex polygon: one vertex per equal angular sector of a rotated ellipse
/// (aspect ratio at most 2), so the shape is never a sliver.
fn convex_polygon(rng: &mut impl Rng, height: usize, width: usize, margin: f64) -> Vec<Point> {
    let n = rng.random_range(3..12);
    let max_r = height.min(width) as f64 / 2.0 - margin;
    let rx = rng.random_range(6.0..=max_r);
    let ry = rng.random_range(rx / 2.0..=(rx * 2.0).min(max_r));
    let r = rx.max(ry);
    let cx = rng.random_range(margin + r..=width as f64 - margin - r);
    let cy = rng.random_range(margin + r..=height as f64 - margin - r);
    let rot: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let sector = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|i| {
            let a = sector * (i as f64 + rng.random_range(0.2..0.8));
            let (x, y) = (rx * a.cos(), ry * a.sin());
            [cx + x * rot.cos() - y * rot.sin(), cy + x * rot.sin() + y * rot.cos()]
        })
        .collect()
}

fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = a.bits().iter().zip(b.bits()).filter(|(&x, &y)| x && y).count();
    let union = a.bits().iter().zip(b.bits()).filter(|(&x, &y)| x || y).count();
    inter as f64 / union as f64
}

#[test]
fn clean_targets_reconstruct_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 60 {
        let h = rng.random_range(48..=128);
        let w = rng.random_range(48..=128);
        let poly = convex_polygon(&mut rng, h, w, 9.0);
        let region = rasterize_polygon(&poly, h, w).unwrap();
        if region.count() < 20 || components_8(&region).len() != 1 {
            continue;
        }
        checked += 1;
        let boundary = extract_boundary(&region);
        for k in [0u32, 1, 3, 5, 7] {
            for variant in [MaskVariant::Thick, MaskVariant::Scored] {
                let spec = MaskSpec::new(MaskKind::Bshape, variant, k, 0.05).unwrap();
                let target = render(&boundary, &spec).unwrap();
                let params = ReconstructionParams {
                    boundary_half_thickness: k,
                    ..Default::default()
                };
                let out = reconstruct_instance(&target, &params).unwrap();
                assert_eq!(out, region, "k={k} {variant:?} poly={poly:?}");
            }
        }
    }
}

#[test]
fn thin_contour_with_deletions_fills_single_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 40 {
        let h = rng.random_range(48..=128);
        let w = rng.random_range(48..=128);
        let poly = convex_polygon(&mut rng, h, w, 4.0);
        let region = rasterize_polygon(&poly, h, w).unwrap();
        if region.count() < 100 || components_8(&region).len() != 1 {
            continue;
        }
        checked += 1;
        let mut contour = extract_boundary(&region).as_mask().clone();
        let pixels: Vec<_> = contour.pixels().collect();
        for &(r, c) in &pixels {
            if rng.random_bool(0.1) {
                contour.set(r, c, false);
            }
        }
        let out = reconstruct_instance(&TargetMask::from_binary(&contour), &ReconstructionParams::default()).unwrap();
        assert_eq!(components_8(&out).len(), 1);
        assert!(contour.pixels().all(|(r, c)| out.get(r, c)));
        let score = iou(&out, &region);
        assert!(score >= 0.85, "iou {score}");
        assert_eq!(fill_region(&out), out);
    }
}

#[test]
fn thick_band_with_deletions_recovers_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 40 {
        let h = rng.random_range(48..=128);
        let w = rng.random_range(48..=128);
        let poly = convex_polygon(&mut rng, h, w, 9.0);
        let region = rasterize_polygon(&poly, h, w).unwrap();
        if region.count() < 100 || components_8(&region).len() != 1 {
            continue;
        }
        checked += 1;
        let mut pixels: Vec<_> = extract_boundary(&region).iter().collect();
        pixels.shuffle(&mut rng);
        let kept = BoundarySet::from_pixels(h, w, &pixels[pixels.len() / 10..]);
        for k in [1u32, 3, 5, 7] {
            let spec = MaskSpec::new(MaskKind::Bshape, MaskVariant::Scored, k, 0.05).unwrap();
            let params = ReconstructionParams {
                boundary_half_thickness: k,
                ..Default::default()
            };
            let out = reconstruct_instance(&render(&kept, &spec).unwrap(), &params).unwrap();
            assert_eq!(components_8(&out).len(), 1, "k={k} poly={poly:?}");
            let score = iou(&out, &region);
            assert!(score >= 0.85, "k={k} iou {score} poly={poly:?}");
        }
    }
}
