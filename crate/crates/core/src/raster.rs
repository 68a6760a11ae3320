//! Polygon scan conversion at pixel centers.
//!
//! Pixel `(r, c)` is foreground when its center `(c + 0.5, r + 0.5)` is inside
//! the polygon under the even-odd rule, or lies exactly on one of its edges.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Vertex in image coordinates, `[x, y]`.
pub type Point = [f64; 2];

pub fn rasterize_polygon(polygon: &[Point], height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(height, width);
    fill_ring(&mut mask, polygon)?;
    Ok(mask)
}

/// Union of several rings, each rasterized independently.
pub fn rasterize_rings(rings: &[Vec<Point>], height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(height, width);
    for ring in rings {
        fill_ring(&mut mask, ring)?;
    }
    Ok(mask)
}

/// True when every vertex lies on one line, i.e. the ring encloses no area.
pub fn is_degenerate(polygon: &[Point]) -> bool {
    let Some(&origin) = polygon.first() else {
        return true;
    };
    let Some(&dir) = polygon.iter().find(|p| **p != origin) else {
        return true;
    };
    let (dx, dy) = (dir[0] - origin[0], dir[1] - origin[1]);
    polygon
        .iter()
        .all(|[x, y]| dx * (y - origin[1]) == dy * (x - origin[0]))
}

fn fill_ring(mask: &mut BinaryMask, ring: &[Point]) -> Result<()> {
    if ring.len() < 3 {
        return Err(Error::Format(format!(
            "polygon ring has {} vertices, need at least 3",
            ring.len()
        )));
    }
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite polygon coordinate".into()));
    }
    if is_degenerate(ring) {
        return Ok(());
    }
    let (height, width) = mask.dims();
    if height == 0 || width == 0 {
        return Ok(());
    }
    let n = ring.len();
    let edges = || (0..n).map(move |i| (ring[i], ring[(i + 1) % n]));

    let mut crossings = Vec::new();
    for r in 0..height {
        let y = r as f64 + 0.5;
        crossings.clear();
        for ([ax, ay], [bx, by]) in edges() {
            if (ay > y) != (by > y) {
                crossings.push(ax + (y - ay) * (bx - ax) / (by - ay));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            mark_span(mask, r, pair[0], pair[1]);
        }
    }

    // Centers lying exactly on an edge count as inside.
    for ([ax, ay], [bx, by]) in edges() {
        let (y_lo, y_hi) = (ay.min(by), ay.max(by));
        let r_lo = (y_lo - 0.5).ceil().max(0.0);
        let r_hi = (y_hi - 0.5).floor().min(height as f64 - 1.0);
        if r_lo > r_hi {
            continue;
        }
        for r in r_lo as usize..=r_hi as usize {
            let y = r as f64 + 0.5;
            if ay == by {
                mark_span(mask, r, ax.min(bx), ax.max(bx));
                continue;
            }
            let x = ax + (y - ay) * (bx - ax) / (by - ay);
            let c = (x - 0.5).round();
            if c < 0.0 || c >= width as f64 {
                continue;
            }
            let xc = c + 0.5;
            if (bx - ax) * (y - ay) == (by - ay) * (xc - ax) {
                mask.set(r, c as usize, true);
            }
        }
    }
    Ok(())
}

/// Sets pixels of row `r` whose centers fall in `[x0, x1]`.
fn mark_span(mask: &mut BinaryMask, r: usize, x0: f64, x1: f64) {
    let lo = (x0 - 0.5).ceil().max(0.0);
    let hi = (x1 - 0.5).floor().min(mask.width() as f64 - 1.0);
    if lo > hi {
        return;
    }
    for c in lo as usize..=hi as usize {
        mask.set(r, c, true);
    }
}
