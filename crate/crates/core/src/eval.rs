//! COCO-style average precision for boxes and masks.
//!
//! Matching follows the COCO convention: detections are visited by descending
//! score and each takes the still-unmatched ground truth with the highest IoU
//! at or above the threshold. Crowd regions and ground truth outside the
//! current size bucket are ignore regions; a detection that can only match an
//! ignore region is neither a true nor a false positive. AP interpolates the
//! precision envelope at 101 recall points.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{Dataset, RawRle};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PixelBox};
use crate::rle::decode_rle;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| 0.5 + 0.05 * i as f64)
}

/// Detections kept per image and category.
pub const MAX_DETECTIONS: usize = 100;
pub const SMALL_AREA: f64 = 32.0 * 32.0;
pub const LARGE_AREA: f64 = 96.0 * 96.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouType {
    Bbox,
    Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Box(PixelBox),
    Mask(BinaryMask),
}

impl Payload {
    pub fn area(&self) -> f64 {
        match self {
            Payload::Box(b) => b.area() as f64,
            Payload::Mask(m) => m.count() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u64,
    pub score: f64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub payload: Payload,
    /// Pixel area used for size buckets.
    pub area: f64,
    pub iscrowd: bool,
}

pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.check_dims(b.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Err(Error::UndefinedIou);
    }
    Ok(inter as f64 / union as f64)
}

/// IoU of inclusive pixel boxes.
pub fn bbox_iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let inter = crate::reconstruct::intersect_boxes(a, b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Overlap between a detection and a ground truth. Crowd regions use the
/// detection's own area as the denominator.
fn overlap(det: &Payload, gt: &Payload, crowd: bool) -> Result<f64> {
    match (det, gt) {
        (Payload::Box(d), Payload::Box(g)) => {
            if crowd {
                let inter = crate::reconstruct::intersect_boxes(d, g).map_or(0, |i| i.area());
                Ok(inter as f64 / d.area() as f64)
            } else {
                Ok(bbox_iou(d, g))
            }
        }
        (Payload::Mask(d), Payload::Mask(g)) => {
            if crowd {
                d.check_dims(g.dims())?;
                let inter = d.bits().iter().zip(g.bits()).filter(|(&x, &y)| x && y).count();
                let area = d.count();
                Ok(if area == 0 { 0.0 } else { inter as f64 / area as f64 })
            } else {
                match mask_iou(d, g) {
                    Err(Error::UndefinedIou) => Ok(0.0),
                    other => other,
                }
            }
        }
        _ => Err(Error::Format(
            "detection and ground truth payload types differ".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchFlag {
    /// Matched the ground truth at this index.
    Tp(usize),
    Fp,
    Ignored,
}

/// Greedy matching of detections, already in processing order, against
/// ground truth. `ious[d][g]` is the overlap of detection `d` with ground truth
/// `g`. Crowd ground truth may absorb any number of detections. Non-ignored
/// ground truth is always preferred; among equals the highest IoU wins, then
/// the lowest index.
pub fn greedy_match(
    ious: &[Vec<f64>],
    gt_ignore: &[bool],
    gt_crowd: &[bool],
    threshold: f64,
) -> Vec<MatchFlag> {
    let threshold = threshold.min(1.0 - 1e-10);
    let mut taken = vec![false; gt_ignore.len()];
    ious.iter()
        .map(|row| {
            let mut best: Option<(bool, f64, usize)> = None;
            for (g, &iou) in row.iter().enumerate() {
                if (taken[g] && !gt_crowd[g]) || iou < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((ign, best_iou, _)) => {
                        (ign && !gt_ignore[g]) || (ign == gt_ignore[g] && iou > best_iou)
                    }
                };
                if better {
                    best = Some((gt_ignore[g], iou, g));
                }
            }
            match best {
                None => MatchFlag::Fp,
                Some((ignored, _, g)) => {
                    taken[g] = true;
                    if ignored {
                        MatchFlag::Ignored
                    } else {
                        MatchFlag::Tp(g)
                    }
                }
            }
        })
        .collect()
}

/// Processing order: descending score, ties by ascending index.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Matches detections of one image and category. Returns `(detection index,
/// flag)` in processing order. Crowd ground truth is an ignore region.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_threshold: f64,
) -> Result<Vec<(usize, MatchFlag)>> {
    let order = score_order(&dets.iter().map(|d| d.score).collect::<Vec<_>>());
    let ious = order
        .iter()
        .map(|&d| {
            gts.iter()
                .map(|g| overlap(&dets[d].payload, &g.payload, g.iscrowd))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let crowd: Vec<bool> = gts.iter().map(|g| g.iscrowd).collect();
    let flags = greedy_match(&ious, &crowd, &crowd, iou_threshold);
    Ok(order.into_iter().zip(flags).collect())
}

/// 101-point interpolated AP of a score-ordered flag sequence. Ignored
/// entries are skipped. -1 when there is no ground truth.
pub fn average_precision(flags: &[MatchFlag], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return -1.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for flag in flags {
        match flag {
            MatchFlag::Tp(_) => tp += 1,
            MatchFlag::Fp => fp += 1,
            MatchFlag::Ignored => continue,
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut total = 0.0;
    for step in 0..=100 {
        let r = step as f64 * 0.01;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            total += precision[idx];
        }
    }
    total / 101.0
}

/// AP family; -1 marks a bucket without ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ap_small: f64,
    pub ap_medium: f64,
    pub ap_large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category_id: u64,
    pub name: String,
    pub num_gt: usize,
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_type: IouType,
    #[serde(flatten)]
    pub overall: EvalResult,
    pub per_category: Vec<CategoryResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    const ALL: [AreaRange; 4] = [AreaRange::All, AreaRange::Small, AreaRange::Medium, AreaRange::Large];

    fn contains(self, area: f64) -> bool {
        match self {
            AreaRange::All => true,
            AreaRange::Small => area < SMALL_AREA,
            AreaRange::Medium => (SMALL_AREA..LARGE_AREA).contains(&area),
            AreaRange::Large => area >= LARGE_AREA,
        }
    }
}

/// Matching of one (image, category) pair under one size bucket and
/// threshold: `(score, flag)` per kept detection, and the non-ignored ground
/// truth count.
fn evaluate_group(
    dets: &[&Detection],
    gts: &[&GroundTruth],
    ious: &[Vec<f64>],
    range: AreaRange,
    threshold: f64,
) -> (Vec<(f64, MatchFlag)>, usize) {
    let ignore: Vec<bool> = gts.iter().map(|g| g.iscrowd || !range.contains(g.area)).collect();
    let crowd: Vec<bool> = gts.iter().map(|g| g.iscrowd).collect();
    let flags = greedy_match(ious, &ignore, &crowd, threshold);
    let out = dets
        .iter()
        .zip(flags)
        .map(|(d, flag)| {
            let flag = match flag {
                MatchFlag::Fp if !range.contains(d.payload.area()) => MatchFlag::Ignored,
                f => f,
            };
            (d.score, flag)
        })
        .collect();
    (out, ignore.iter().filter(|&&i| !i).count())
}

fn payload_key(p: &Payload) -> Vec<i64> {
    match p {
        Payload::Box(b) => vec![b.x_min, b.y_min, b.x_max, b.y_max],
        Payload::Mask(m) => crate::rle::encode_rle(m).into_iter().map(|c| c as i64).collect(),
    }
}

/// Full evaluation. `categories` lists `(id, name)` of every category to
/// report; detections of other categories are dropped with a warning.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    categories: &[(u64, String)],
    iou_type: IouType,
) -> Result<EvalReport> {
    let known: HashMap<u64, &str> = categories.iter().map(|(id, n)| (*id, n.as_str())).collect();

    // Canonical order makes the result independent of input order.
    let mut canonical: Vec<(usize, &Detection, Vec<i64>)> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| {
            let ok = known.contains_key(&d.category_id);
            if !ok {
                log::warn!("ignoring detection with unknown category {}", d.category_id);
            }
            ok
        })
        .map(|(i, d)| (i, d, payload_key(&d.payload)))
        .collect();
    canonical.sort_by(|a, b| {
        (a.1.image_id, a.1.category_id)
            .cmp(&(b.1.image_id, b.1.category_id))
            .then(b.1.score.total_cmp(&a.1.score))
            .then_with(|| a.2.cmp(&b.2))
            .then(a.0.cmp(&b.0))
    });

    type Group<'a> = (Vec<&'a Detection>, Vec<&'a GroundTruth>);
    let mut groups: BTreeMap<(u64, u64), Group> = BTreeMap::new();
    for (_, d, _) in &canonical {
        let entry = groups.entry((d.category_id, d.image_id)).or_default();
        if entry.0.len() < MAX_DETECTIONS {
            entry.0.push(d);
        }
    }
    for g in gts {
        groups.entry((g.category_id, g.image_id)).or_default().1.push(g);
    }

    let groups: Vec<_> = groups.into_iter().collect();
    let ious = groups
        .par_iter()
        .map(|(_, (ds, gs))| {
            ds.iter()
                .map(|d| {
                    gs.iter()
                        .map(|g| overlap(&d.payload, &g.payload, g.iscrowd))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let thresholds = iou_thresholds();
    // ap[(category, range)][threshold]
    let mut per_cat: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
    let mut num_gt_all: BTreeMap<u64, usize> = BTreeMap::new();
    for &(cat, _) in categories {
        let member: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, ((c, _), _))| *c == cat)
            .map(|(i, _)| i)
            .collect();
        let table: Vec<Vec<f64>> = AreaRange::ALL
            .iter()
            .map(|&range| {
                thresholds
                    .par_iter()
                    .map(|&t| {
                        let mut flags = Vec::new();
                        let mut num_gt = 0;
                        for &i in &member {
                            let (_, (ds, gs)) = &groups[i];
                            let (f, n) = evaluate_group(ds, gs, &ious[i], range, t);
                            flags.extend(f);
                            num_gt += n;
                        }
                        // stable: ties keep image order
                        flags.sort_by(|a, b| b.0.total_cmp(&a.0));
                        let flags: Vec<MatchFlag> = flags.into_iter().map(|(_, f)| f).collect();
                        average_precision(&flags, num_gt)
                    })
                    .collect()
            })
            .collect();
        let n_all = member
            .iter()
            .map(|&i| groups[i].1 .1.iter().filter(|g| !g.iscrowd).count())
            .sum();
        num_gt_all.insert(cat, n_all);
        per_cat.insert(cat, table);
    }

    let mean_valid = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let valid: Vec<f64> = values.filter(|&v| v > -1.0).collect();
        if valid.is_empty() {
            -1.0
        } else {
            valid.iter().sum::<f64>() / valid.len() as f64
        }
    };
    let bucket = |range_idx: usize, thr: Option<usize>| -> f64 {
        mean_valid(&mut per_cat.values().flat_map(|table| {
            let row = &table[range_idx];
            match thr {
                Some(t) => vec![row[t]],
                None => row.clone(),
            }
        }))
    };

    let overall = EvalResult {
        ap: bucket(0, None),
        ap50: bucket(0, Some(0)),
        ap75: bucket(0, Some(5)),
        ap_small: bucket(1, None),
        ap_medium: bucket(2, None),
        ap_large: bucket(3, None),
    };
    let per_category = categories
        .iter()
        .map(|(id, name)| {
            let row = &per_cat[id][0];
            CategoryResult {
                category_id: *id,
                name: name.clone(),
                num_gt: num_gt_all[id],
                ap: mean_valid(&mut row.iter().copied()),
                ap50: row[0],
                ap75: row[5],
            }
        })
        .collect();
    Ok(EvalReport {
        iou_type,
        overall,
        per_category,
    })
}

/// Ground truth of a dataset in the payload form `iou_type` needs. Sizes are
/// bucketed by the pixel area of the instance raster.
pub fn ground_truths(dataset: &Dataset, iou_type: IouType) -> Result<Vec<GroundTruth>> {
    dataset
        .annotations()
        .par_iter()
        .map(|ann| {
            let img = dataset.image(ann.image_id).expect("validated at parse");
            let mask = ann.to_mask(img.height, img.width)?;
            let area = mask.count() as f64;
            let payload = match iou_type {
                IouType::Mask => Payload::Mask(mask),
                IouType::Bbox => Payload::Box(PixelBox::from_xywh(ann.bbox, img.height, img.width).map_err(
                    |e| Error::Integrity {
                        annotation_id: ann.id,
                        message: e.to_string(),
                    },
                )?),
            };
            Ok(GroundTruth {
                id: ann.id,
                image_id: ann.image_id,
                category_id: ann.category_id,
                payload,
                area,
                iscrowd: ann.iscrowd,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawDetection {
    image_id: u64,
    category_id: u64,
    score: f64,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    segmentation: Option<RawRle>,
}

/// Parses a detections file (a JSON array) against the images of `dataset`.
/// Detections on unknown images, or boxes that miss their image entirely, are
/// dropped with a warning.
pub fn parse_detections(text: &str, dataset: &Dataset, iou_type: IouType) -> Result<Vec<Detection>> {
    let raw: Vec<RawDetection> = serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
    let mut out = Vec::with_capacity(raw.len());
    for (i, d) in raw.into_iter().enumerate() {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::Format(format!("detection {i}: score {} outside [0, 1]", d.score)));
        }
        let Some(img) = dataset.image(d.image_id) else {
            log::warn!("detection {i}: unknown image {}, ignored", d.image_id);
            continue;
        };
        let payload = match iou_type {
            IouType::Bbox => {
                let bbox = d
                    .bbox
                    .ok_or_else(|| Error::Format(format!("detection {i}: missing bbox")))?;
                match PixelBox::from_xywh(bbox, img.height, img.width) {
                    Ok(b) => Payload::Box(b),
                    Err(Error::EmptyBox) => {
                        log::warn!("detection {i}: box {bbox:?} covers no pixel, ignored");
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            IouType::Mask => {
                let rle = d
                    .segmentation
                    .ok_or_else(|| Error::Format(format!("detection {i}: missing segmentation")))?;
                let (counts, h, w) = rle
                    .into_parts()
                    .map_err(|m| Error::Format(format!("detection {i}: {m}")))?;
                if (h, w) != (img.height, img.width) {
                    return Err(Error::Format(format!(
                        "detection {i}: mask size {h}x{w} differs from image {}x{}",
                        img.height, img.width
                    )));
                }
                Payload::Mask(decode_rle(&counts, h, w)?)
            }
        };
        out.push(Detection {
            image_id: d.image_id,
            category_id: d.category_id,
            score: d.score,
            payload,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: i64, y0: i64, x1: i64, y1: i64) -> PixelBox {
        PixelBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(score: f64, b: PixelBox) -> Detection {
        Detection {
            image_id: 1,
            category_id: 1,
            score,
            payload: Payload::Box(b),
        }
    }

    fn gt(id: u64, b: PixelBox) -> GroundTruth {
        GroundTruth {
            id,
            image_id: 1,
            category_id: 1,
            payload: Payload::Box(b),
            area: b.area() as f64,
            iscrowd: false,
        }
    }

    #[test]
    fn mask_ious() {
        let a = BinaryMask::from_fn(4, 4, |r, c| r < 2 && c < 2);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let far = BinaryMask::from_fn(4, 4, |r, c| r >= 2 && c >= 2);
        assert_eq!(mask_iou(&a, &far).unwrap(), 0.0);
        let shifted = BinaryMask::from_fn(4, 4, |r, c| r < 2 && (1..3).contains(&c));
        assert!((mask_iou(&a, &shifted).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            mask_iou(&BinaryMask::new(2, 2), &BinaryMask::new(2, 2)),
            Err(Error::UndefinedIou)
        ));
        assert!(matches!(
            mask_iou(&a, &BinaryMask::new(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn box_ious() {
        let a = bx(0, 0, 3, 3);
        assert_eq!(bbox_iou(&a, &a), 1.0);
        assert_eq!(bbox_iou(&a, &bx(5, 5, 6, 6)), 0.0);
        assert!((bbox_iou(&a, &bx(2, 2, 5, 5)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn greedy_cases() {
        let g = [gt(1, bx(0, 0, 9, 9))];
        let m = match_detections(&[det(0.7, bx(0, 0, 9, 9))], &g, 0.5).unwrap();
        assert_eq!(m, vec![(0, MatchFlag::Tp(0))]);

        let dets = [det(0.8, bx(0, 0, 9, 8)), det(0.9, bx(0, 0, 9, 9))];
        let m = match_detections(&dets, &g, 0.5).unwrap();
        assert_eq!(m, vec![(1, MatchFlag::Tp(0)), (0, MatchFlag::Fp)]);

        let m = match_detections(&[det(0.9, bx(0, 0, 2, 2))], &g, 0.5).unwrap();
        assert_eq!(m, vec![(0, MatchFlag::Fp)]);
    }

    #[test]
    fn crowd_absorbs_detections() {
        let mut crowd = gt(1, bx(0, 0, 19, 19));
        crowd.iscrowd = true;
        let dets = [det(0.9, bx(0, 0, 4, 4)), det(0.8, bx(5, 5, 9, 9))];
        let m = match_detections(&dets, &[crowd], 0.5).unwrap();
        assert_eq!(m, vec![(0, MatchFlag::Ignored), (1, MatchFlag::Ignored)]);
    }

    #[test]
    fn ap_cases() {
        assert_eq!(average_precision(&[MatchFlag::Tp(0)], 1), 1.0);
        assert_eq!(average_precision(&[MatchFlag::Fp, MatchFlag::Fp], 2), 0.0);
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[MatchFlag::Fp, MatchFlag::Tp(0)], 1), 0.5);
        assert_eq!(average_precision(&[MatchFlag::Tp(0)], 0), -1.0);
        // half recall at full precision: 51 of 101 recall points
        assert!((average_precision(&[MatchFlag::Tp(0)], 2) - 51.0 / 101.0).abs() < 1e-15);
        // ignored entries are skipped
        assert_eq!(
            average_precision(&[MatchFlag::Ignored, MatchFlag::Tp(0)], 1),
            1.0
        );
    }

    #[test]
    fn thresholds() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert!((t[9] - 0.95).abs() < 1e-12);
    }

    fn cats() -> Vec<(u64, String)> {
        vec![(1, "a".into()), (2, "b".into())]
    }

    #[test]
    fn perfect_and_empty() {
        let gts = vec![gt(1, bx(0, 0, 9, 9)), gt(2, bx(20, 20, 59, 59))];
        let dets: Vec<_> = gts
            .iter()
            .map(|g| Detection {
                image_id: g.image_id,
                category_id: g.category_id,
                score: 1.0,
                payload: g.payload.clone(),
            })
            .collect();
        let r = evaluate(&dets, &gts, &cats(), IouType::Bbox).unwrap().overall;
        assert_eq!((r.ap, r.ap50, r.ap75, r.ap_small, r.ap_medium), (1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.ap_large, -1.0);

        let r = evaluate(&[], &gts, &cats(), IouType::Bbox).unwrap().overall;
        assert_eq!((r.ap, r.ap50, r.ap75, r.ap_small, r.ap_medium, r.ap_large), (0.0, 0.0, 0.0, 0.0, 0.0, -1.0));
    }

    #[test]
    fn unknown_category_is_dropped() {
        let gts = vec![gt(1, bx(0, 0, 9, 9))];
        let mut stray = det(0.99, bx(0, 0, 3, 3));
        stray.category_id = 42;
        let dets = vec![stray, det(0.5, bx(0, 0, 9, 9))];
        let r = evaluate(&dets, &gts, &cats(), IouType::Bbox).unwrap();
        assert_eq!(r.overall.ap, 1.0);
        assert_eq!(r.per_category[1].ap, -1.0);
    }
}
