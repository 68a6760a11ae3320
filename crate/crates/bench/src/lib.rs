//! Deterministic inputs shared by the benchmarks.

use bshape_core::eval::{Detection, GroundTruth, Payload};
use bshape_core::raster::{rasterize_polygon, Point};
use bshape_core::{BinaryMask, PixelBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Regular polygon with `n` vertices inscribed in an ellipse filling most of
/// a `size x size` image.
pub fn ellipse_polygon(size: usize, n: usize) -> Vec<Point> {
    let c = size as f64 / 2.0;
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            [c + 0.8 * c * a.cos(), c + 0.5 * c * a.sin()]
        })
        .collect()
}

pub fn ellipse_region(size: usize) -> BinaryMask {
    rasterize_polygon(&ellipse_polygon(size, 48), size, size).expect("valid polygon")
}

fn random_box(rng: &mut impl Rng, size: i64) -> PixelBox {
    let x = rng.random_range(0..size - 8);
    let y = rng.random_range(0..size - 8);
    let w = rng.random_range(4..=(size - x).min(64));
    let h = rng.random_range(4..=(size - y).min(64));
    PixelBox::new(x, y, x + w - 1, y + h - 1).expect("non-empty box")
}

/// `images` images of 512 x 512 with `per_image` ground-truth boxes each, and
/// detections that jitter every ground truth plus as many random boxes.
pub fn box_scene(images: u64, per_image: usize, seed: u64) -> (Vec<Detection>, Vec<GroundTruth>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    let mut id = 0;
    for image_id in 0..images {
        for _ in 0..per_image {
            let b = random_box(&mut rng, 512);
            let category_id = rng.random_range(1..=3);
            id += 1;
            gts.push(GroundTruth {
                id,
                image_id,
                category_id,
                payload: Payload::Box(b),
                area: b.area() as f64,
                iscrowd: false,
            });
            let dx = rng.random_range(-3..=3);
            let dy = rng.random_range(-3..=3);
            let (x0, y0) = ((b.x_min + dx).max(0), (b.y_min + dy).max(0));
            let jittered = PixelBox::new(x0, y0, (b.x_max + dx).max(x0), (b.y_max + dy).max(y0))
                .expect("corners in order");
            dets.push(Detection {
                image_id,
                category_id,
                score: rng.random_range(0.3..1.0),
                payload: Payload::Box(jittered),
            });
            dets.push(Detection {
                image_id,
                category_id,
                score: rng.random_range(0.0..0.7),
                payload: Payload::Box(random_box(&mut rng, 512)),
            });
        }
    }
    (dets, gts)
}
