//! COCO-style annotation files.

use std::collections::{HashMap, HashSet};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::raster::{rasterize_rings, Point};
use crate::rle::{decode_rle, rle_area};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: u64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    /// One or more rings; the instance is their union.
    Polygons(Vec<Vec<Point>>),
    /// Uncompressed RLE (see [`crate::rle`]).
    Rle {
        counts: Vec<u64>,
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    /// `[x, y, width, height]` in pixels.
    pub bbox: [f64; 4],
    /// Area as recorded in the file, if any.
    pub area: Option<f64>,
    /// Crowd regions are kept but treated as ignore regions during evaluation.
    pub iscrowd: bool,
}

impl InstanceAnnotation {
    /// Instance raster on a `height x width` image.
    pub fn to_mask(&self, height: usize, width: usize) -> Result<BinaryMask> {
        match &self.segmentation {
            Segmentation::Polygons(rings) => rasterize_rings(rings, height, width),
            Segmentation::Rle {
                counts,
                height: h,
                width: w,
            } => {
                if (*h, *w) != (height, width) {
                    return Err(Error::Dimension {
                        expected: (height, width),
                        actual: (*h, *w),
                    });
                }
                decode_rle(counts, height, width)
            }
        }
    }

    /// Foreground pixel count of the instance raster.
    pub fn pixel_area(&self, height: usize, width: usize) -> Result<u64> {
        match &self.segmentation {
            Segmentation::Rle { counts, .. } => Ok(rle_area(counts)),
            Segmentation::Polygons(_) => Ok(self.to_mask(height, width)?.count() as u64),
        }
    }
}

/// Parsed annotation file. Every annotation refers to a known image and
/// category.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<ImageRecord>,
    annotations: Vec<InstanceAnnotation>,
    categories: Vec<Category>,
    image_index: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(
        images: Vec<ImageRecord>,
        annotations: Vec<InstanceAnnotation>,
        categories: Vec<Category>,
    ) -> Result<Self> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if img.width == 0 || img.height == 0 {
                return Err(Error::Format(format!(
                    "image {} has zero size {}x{}",
                    img.id, img.width, img.height
                )));
            }
            if image_index.insert(img.id, i).is_some() {
                return Err(Error::Format(format!("duplicate image id {}", img.id)));
            }
        }
        let category_ids: HashSet<u64> = categories.iter().map(|c| c.id).collect();
        for ann in &annotations {
            let integrity = |message: String| Error::Integrity {
                annotation_id: ann.id,
                message,
            };
            let img = image_index
                .get(&ann.image_id)
                .map(|&i| &images[i])
                .ok_or_else(|| integrity(format!("unknown image_id {}", ann.image_id)))?;
            if !category_ids.contains(&ann.category_id) {
                return Err(integrity(format!("unknown category_id {}", ann.category_id)));
            }
            match &ann.segmentation {
                Segmentation::Polygons(rings) => {
                    if let Some(ring) = rings.iter().find(|r| r.len() < 3) {
                        return Err(integrity(format!(
                            "polygon ring with {} vertices",
                            ring.len()
                        )));
                    }
                }
                Segmentation::Rle {
                    counts,
                    height,
                    width,
                } => {
                    if (*height, *width) != (img.height, img.width) {
                        return Err(integrity(format!(
                            "RLE size {height}x{width} differs from image {}x{}",
                            img.height, img.width
                        )));
                    }
                    let total: u64 = counts.iter().sum();
                    if total != (height * width) as u64 {
                        return Err(integrity(format!(
                            "RLE counts sum to {total}, expected {}",
                            height * width
                        )));
                    }
                }
            }
        }
        Ok(Self {
            images,
            annotations,
            categories,
            image_index,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn annotations(&self) -> &[InstanceAnnotation] {
        &self.annotations
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }
}

#[derive(Deserialize)]
struct RawDataset {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    width: usize,
    height: usize,
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    #[serde(default)]
    name: String,
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    segmentation: RawSegmentation,
    bbox: [f64; 4],
    #[serde(default)]
    area: Option<f64>,
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Deserialize)]
#[serde(untagged)]
pub(crate) enum RawSegmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(RawRle),
}

#[derive(Deserialize)]
pub(crate) struct RawRle {
    counts: serde_json::Value,
    size: [usize; 2],
}

impl RawRle {
    /// `(counts, height, width)`; string-compressed counts are rejected.
    pub(crate) fn into_parts(self) -> std::result::Result<(Vec<u64>, usize, usize), String> {
        let [height, width] = self.size;
        let counts = match self.counts {
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(|v| v.as_u64().ok_or_else(|| format!("invalid RLE count {v}")))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            serde_json::Value::String(_) => {
                return Err("compressed string RLE is not supported; convert to uncompressed counts".into())
            }
            other => return Err(format!("invalid RLE counts {other}")),
        };
        Ok((counts, height, width))
    }
}

impl RawSegmentation {
    pub(crate) fn into_segmentation(self) -> std::result::Result<Segmentation, String> {
        match self {
            RawSegmentation::Polygons(rings) => rings
                .into_iter()
                .map(|flat| {
                    if flat.len() % 2 != 0 {
                        return Err(format!("polygon with odd coordinate count {}", flat.len()));
                    }
                    Ok(flat.chunks_exact(2).map(|xy| [xy[0], xy[1]]).collect())
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Segmentation::Polygons),
            RawSegmentation::Rle(rle) => {
                let (counts, height, width) = rle.into_parts()?;
                Ok(Segmentation::Rle {
                    counts,
                    height,
                    width,
                })
            }
        }
    }
}

/// Parses and cross-links an annotation file. Unknown fields are ignored.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
    let images = raw
        .images
        .into_iter()
        .map(|i| ImageRecord {
            id: i.id,
            width: i.width,
            height: i.height,
        })
        .collect();
    let categories = raw
        .categories
        .into_iter()
        .map(|c| Category {
            id: c.id,
            name: c.name,
        })
        .collect();
    let annotations = raw
        .annotations
        .into_iter()
        .map(|a| {
            let segmentation = a.segmentation.into_segmentation().map_err(|message| {
                Error::Integrity {
                    annotation_id: a.id,
                    message,
                }
            })?;
            Ok(InstanceAnnotation {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                segmentation,
                bbox: a.bbox,
                area: a.area,
                iscrowd: a.iscrowd != 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, annotations, categories)
}
