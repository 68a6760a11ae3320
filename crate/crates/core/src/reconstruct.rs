//! Instance recovery from predicted boundary masks, and box decoding.
//!
//! Recovery runs in two steps. First the boundary fragments are connected:
//! 8-connected components become nodes of a complete graph weighted by the
//! closest-pixel distance between components, Prim's algorithm picks the
//! minimum spanning tree, and every tree edge no longer than the bridge cap is
//! drawn as a Bresenham segment. A spanning tree never closes a broken ring,
//! so open contour ends left after bridging (end points of the thinned
//! contour) are then paired with each other when they are close in the plane
//! but far apart along the contour. Second,
//! the closed contour is filled by flooding the exterior background.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskgen::cross_distance_to;
use crate::mask::{BinaryMask, PixelBox, TargetMask};

pub const DEFAULT_THRESHOLD: f32 = 0.5;
pub const DEFAULT_MAX_BRIDGE: f64 = 32.0;
/// Widest notch in a thick band that is closed before erosion.
const NOTCH_WIDTH: usize = 2;

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionParams {
    /// Predicted values `>= threshold` are boundary.
    pub binarize_threshold: f32,
    /// Bridges longer than this (pixels, Euclidean) are not drawn.
    pub max_bridge_distance: f64,
    /// Half-thickness `k` of the predicted boundary band. The filled region is
    /// eroded by the same cross-shaped span so that a band grown `k` pixels
    /// outward from the true contour gives back the original region. 0 keeps
    /// the filled region as is.
    pub boundary_half_thickness: u32,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        Self {
            binarize_threshold: DEFAULT_THRESHOLD,
            max_bridge_distance: DEFAULT_MAX_BRIDGE,
            boundary_half_thickness: 0,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(Error::Domain(format!(
                "threshold {} not in (0, 1)",
                self.binarize_threshold
            )));
        }
        if self.max_bridge_distance.is_nan() || self.max_bridge_distance < 1.0 {
            return Err(Error::Domain(format!(
                "max bridge distance {} below 1",
                self.max_bridge_distance
            )));
        }
        Ok(())
    }
}

/// 8-connected foreground components, each listed in row-major discovery
/// order; components are ordered by their first pixel.
pub fn components_8(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (height, width) = mask.dims();
    let mut seen = vec![false; height * width];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in mask.pixels() {
        if seen[start.0 * width + start.1] {
            continue;
        }
        seen[start.0 * width + start.1] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some((r, c)) = queue.pop_front() {
            comp.push((r, c));
            for (dr, dc) in NEIGHBORS_8 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if mask.get_signed(nr, nc) {
                    let idx = nr as usize * width + nc as usize;
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back((nr as usize, nc as usize));
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Pixels on the discrete segment from `a` to `b` (Bresenham), endpoints
/// included. Consecutive pixels are 8-adjacent.
pub fn bresenham(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut r, mut c) = (a.0 as i64, a.1 as i64);
    let (r1, c1) = (b.0 as i64, b.1 as i64);
    let dc = (c1 - c).abs();
    let dr = -(r1 - r).abs();
    let sc = if c < c1 { 1 } else { -1 };
    let sr = if r < r1 { 1 } else { -1 };
    let mut err = dc + dr;
    let mut out = Vec::with_capacity((dc - dr) as usize + 1);
    loop {
        out.push((r as usize, c as usize));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dr {
            err += dr;
            c += sc;
        }
        if e2 <= dc {
            err += dc;
            r += sr;
        }
    }
    out
}

#[inline]
fn dist2(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dr = a.0.abs_diff(b.0) as u64;
    let dc = a.1.abs_diff(b.1) as u64;
    dr * dr + dc * dc
}

/// Closest pixel pair between two components: `(squared distance, a, b)`,
/// ties broken by the lexicographically smallest pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bridge {
    pub dist2: u64,
    pub from: (usize, usize),
    pub to: (usize, usize),
}

impl Bridge {
    pub fn length(&self) -> f64 {
        (self.dist2 as f64).sqrt()
    }
}

/// Pixels of a component with a background 8-neighbor; the closest pair
/// between two disjoint components always lies on these.
fn outline(mask: &BinaryMask, comp: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let (height, width) = mask.dims();
    comp.iter()
        .copied()
        .filter(|&(r, c)| {
            NEIGHBORS_8.iter().any(|&(dr, dc)| {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                nr >= 0
                    && nc >= 0
                    && (nr as usize) < height
                    && (nc as usize) < width
                    && !mask.get(nr as usize, nc as usize)
            })
        })
        .collect()
}

fn closest_pair(a: &[(usize, usize)], b: &[(usize, usize)]) -> Bridge {
    let mut best = Bridge {
        dist2: u64::MAX,
        from: (usize::MAX, usize::MAX),
        to: (usize::MAX, usize::MAX),
    };
    for &p in a {
        for &q in b {
            let cand = Bridge {
                dist2: dist2(p, q),
                from: p,
                to: q,
            };
            if cand < best {
                best = cand;
            }
        }
    }
    best
}

/// Prim's algorithm on a dense symmetric weight matrix. Returns tree edges as
/// `(parent, child)` in the order they were added. Ties go to the lowest
/// node index.
pub fn prim_mst(weights: &[Vec<u64>]) -> Vec<(usize, usize)> {
    let n = weights.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for v in 1..n {
        best[v] = weights[0][v];
        parent[v] = 0;
    }
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by_key(|&v| (best[v], v))
            .expect("a node outside the tree");
        in_tree[next] = true;
        edges.push((parent[next], next));
        for v in 0..n {
            if !in_tree[v] && weights[next][v] < best[v] {
                best[v] = weights[next][v];
                parent[v] = next;
            }
        }
    }
    edges
}

fn draw(mask: &mut BinaryMask, a: (usize, usize), b: (usize, usize)) {
    for (r, c) in bresenham(a, b) {
        mask.set(r, c, true);
    }
}

fn neighbor_count(mask: &BinaryMask, (r, c): (usize, usize)) -> usize {
    NEIGHBORS_8
        .iter()
        .filter(|&&(dr, dc)| mask.get_signed(r as isize + dr, c as isize + dc))
        .count()
}

/// 8-connected step distance from `start` to every foreground pixel.
fn geodesic_from(mask: &BinaryMask, start: (usize, usize)) -> Vec<u32> {
    let (_, width) = mask.dims();
    let mut dist = vec![u32::MAX; mask.bits().len()];
    let mut queue = VecDeque::from([start]);
    dist[start.0 * width + start.1] = 0;
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[r * width + c];
        for (dr, dc) in NEIGHBORS_8 {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if mask.get_signed(nr, nc) {
                let idx = nr as usize * width + nc as usize;
                if dist[idx] == u32::MAX {
                    dist[idx] = d + 1;
                    queue.push_back((nr as usize, nc as usize));
                }
            }
        }
    }
    dist
}

/// Zhang-Suen thinning to an 8-connected skeleton of one-pixel width.
/// Pixels with fewer than two neighbours are never removed, so line ends
/// survive.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut out = mask.clone();
    // P2..P9 clockwise from north
    const RING: [(isize, isize); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    let mut removed = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            removed.clear();
            for (r, c) in out.pixels() {
                let n: [bool; 8] = RING.map(|(dr, dc)| out.get_signed(r as isize + dr, c as isize + dc));
                let count = n.iter().filter(|&&x| x).count();
                if !(2..=6).contains(&count) {
                    continue;
                }
                let transitions = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                if transitions != 1 {
                    continue;
                }
                let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                let keep = if pass == 0 {
                    (p2 && p4 && p6) || (p4 && p6 && p8)
                } else {
                    (p2 && p4 && p8) || (p2 && p6 && p8)
                };
                if !keep {
                    removed.push((r, c));
                }
            }
            for &(r, c) in &removed {
                out.set(r, c, false);
            }
            changed |= !removed.is_empty();
        }
        if !changed {
            return out;
        }
    }
}

/// Pairs open contour ends, taken as the end points of the skeleton so that
/// bands several pixels wide are handled like thin contours. Enclosed holes
/// are filled before thinning; they would be filled in the end anyway, and a
/// hole inside a band would otherwise turn into a skeleton loop that hides an
/// end. Two ends are
/// joined when the straight gap is at most `max_bridge` and walking between
/// them through the foreground takes more than twice the gap's Chebyshev
/// length plus 4 steps; nearer pairs go first.
fn close_open_ends(mask: &mut BinaryMask, max_bridge: f64) {
    let solid = fill_region(mask);
    let skeleton = thin(&solid);
    let ends: Vec<(usize, usize)> = skeleton
        .pixels()
        .filter(|&p| neighbor_count(&skeleton, p) <= 1)
        .collect();
    if ends.len() < 2 {
        return;
    }
    let width = mask.width();
    let max2 = max_bridge * max_bridge;
    let mut pairs = Vec::new();
    for (i, &a) in ends.iter().enumerate() {
        let geo = geodesic_from(&solid, a);
        for (j, &b) in ends.iter().enumerate().skip(i + 1) {
            let d2 = dist2(a, b);
            if d2 as f64 > max2 {
                continue;
            }
            let walk = geo[b.0 * width + b.1];
            if walk == u32::MAX {
                continue;
            }
            let cheb = a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) as u32;
            if walk > 2 * cheb + 4 {
                pairs.push((d2, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut used = vec![false; ends.len()];
    for (_, i, j) in pairs {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        draw(mask, ends[i], ends[j]);
    }
}

/// Joins boundary fragments; the output contains the input.
pub fn connect_boundary(mask: &BinaryMask, params: &ReconstructionParams) -> BinaryMask {
    let mut out = mask.clone();
    let comps = components_8(mask);
    if comps.len() > 1 {
        let outlines: Vec<_> = comps.iter().map(|c| outline(mask, c)).collect();
        let n = comps.len();
        let mut bridges = vec![vec![None; n]; n];
        let mut weights = vec![vec![0u64; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let b = closest_pair(&outlines[i], &outlines[j]);
                weights[i][j] = b.dist2;
                weights[j][i] = b.dist2;
                bridges[i][j] = Some(b);
            }
        }
        for (u, v) in prim_mst(&weights) {
            let b = bridges[u.min(v)][u.max(v)].expect("bridge for every pair");
            if b.length() <= params.max_bridge_distance {
                draw(&mut out, b.from, b.to);
            }
        }
    }
    close_open_ends(&mut out, params.max_bridge_distance);
    out
}

/// Everything the exterior flood (4-connected background reachable from the
/// image border) does not reach.
pub fn fill_region(mask: &BinaryMask) -> BinaryMask {
    let (height, width) = mask.dims();
    let mut outside = vec![false; height * width];
    let mut queue = VecDeque::new();
    let seed = |r: usize, c: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let idx = r * width + c;
        if !mask.get(r, c) && !outside[idx] {
            outside[idx] = true;
            queue.push_back((r, c));
        }
    };
    for r in 0..height {
        seed(r, 0, &mut outside, &mut queue);
        if width > 0 {
            seed(r, width - 1, &mut outside, &mut queue);
        }
    }
    for c in 0..width {
        seed(0, c, &mut outside, &mut queue);
        if height > 0 {
            seed(height - 1, c, &mut outside, &mut queue);
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= height || nc as usize >= width {
                continue;
            }
            seed(nr as usize, nc as usize, &mut outside, &mut queue);
        }
    }
    let bits = outside.into_iter().map(|o| !o).collect();
    BinaryMask::from_bits(height, width, bits).expect("same dimensions")
}

/// Keeps a pixel when no background pixel lies within `k` along its row or
/// its column. Pixels outside the image do not count as background.
pub fn erode_cross(mask: &BinaryMask, k: u32) -> BinaryMask {
    if k == 0 {
        return mask.clone();
    }
    let (height, width) = mask.dims();
    let background = BinaryMask::from_bits(height, width, mask.bits().iter().map(|&b| !b).collect())
        .expect("same dimensions");
    let bits = cross_distance_to(&background)
        .into_iter()
        .map(|d| d > k)
        .collect();
    BinaryMask::from_bits(height, width, bits).expect("same dimensions")
}

/// Fills background runs of at most `max_gap` pixels that have foreground on
/// both sides in the same row, then the same along columns.
pub fn close_gaps(mask: &BinaryMask, max_gap: usize) -> BinaryMask {
    fn pass(mask: &mut BinaryMask, max_gap: usize) {
        let (height, width) = mask.dims();
        for r in 0..height {
            let mut last_fg: Option<usize> = None;
            for c in 0..width {
                if mask.get(r, c) {
                    if let Some(prev) = last_fg {
                        let gap = c - prev - 1;
                        if gap > 0 && gap <= max_gap {
                            for q in prev + 1..c {
                                mask.set(r, q, true);
                            }
                        }
                    }
                    last_fg = Some(c);
                }
            }
        }
    }
    let mut out = mask.clone();
    pass(&mut out, max_gap);
    let mut t = out.transpose();
    pass(&mut t, max_gap);
    t.transpose()
}

/// Erosion can cut thin tips off a region where the band had notches. Within
/// each component of `filled`, eroded pieces smaller than `(k + 1)^2` pixels
/// are dropped when a larger piece exists.
fn drop_debris(filled: &BinaryMask, mut eroded: BinaryMask, k: u32) -> BinaryMask {
    let width = filled.width();
    let mut owner = vec![usize::MAX; filled.bits().len()];
    for (id, comp) in components_8(filled).iter().enumerate() {
        for &(r, c) in comp {
            owner[r * width + c] = id;
        }
    }
    let pieces = components_8(&eroded);
    let mut largest = HashMap::new();
    for piece in &pieces {
        let (r, c) = piece[0];
        let best = largest.entry(owner[r * width + c]).or_insert(0);
        *best = piece.len().max(*best);
    }
    let min_size = ((k as usize) + 1).pow(2);
    for piece in &pieces {
        let (r, c) = piece[0];
        if piece.len() < min_size && piece.len() < largest[&owner[r * width + c]] {
            for &(r, c) in piece {
                eroded.set(r, c, false);
            }
        }
    }
    eroded
}

/// Binarize, connect, fill, then undo the band's outward growth.
pub fn reconstruct_instance(pred: &TargetMask, params: &ReconstructionParams) -> Result<BinaryMask> {
    params.validate()?;
    let boundary = pred.binarize(params.binarize_threshold);
    let connected = connect_boundary(&boundary, params);
    let filled = fill_region(&connected);
    let k = params.boundary_half_thickness;
    if k == 0 {
        return Ok(filled);
    }
    let filled = close_gaps(&filled, NOTCH_WIDTH);
    let eroded = erode_cross(&filled, k);
    Ok(drop_debris(&filled, eroded, k))
}

/// Tight extent of the foreground; `x` is the column, `y` the row.
pub fn bbox_from_mask(mask: &BinaryMask) -> Result<PixelBox> {
    let mut pixels = mask.pixels();
    let (r0, c0) = pixels.next().ok_or(Error::EmptyMask)?;
    let mut b = PixelBox {
        x_min: c0 as i64,
        y_min: r0 as i64,
        x_max: c0 as i64,
        y_max: r0 as i64,
    };
    for (r, c) in pixels {
        let (r, c) = (r as i64, c as i64);
        b.x_min = b.x_min.min(c);
        b.x_max = b.x_max.max(c);
        b.y_min = b.y_min.min(r);
        b.y_max = b.y_max.max(r);
    }
    Ok(b)
}

/// Overlap of two boxes, `None` when they do not share a pixel.
pub fn intersect_boxes(a: &PixelBox, b: &PixelBox) -> Option<PixelBox> {
    let x_min = a.x_min.max(b.x_min);
    let y_min = a.y_min.max(b.y_min);
    let x_max = a.x_max.min(b.x_max);
    let y_max = a.y_max.min(b.y_max);
    (x_min <= x_max && y_min <= y_max).then_some(PixelBox {
        x_min,
        y_min,
        x_max,
        y_max,
    })
}
