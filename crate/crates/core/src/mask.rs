//! Raster containers shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// Foreground/background raster of a single instance, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Format(format!(
                "{} bits given for a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    /// Builds a mask with the listed `(row, col)` pixels set.
    ///
    /// Panics if a pixel lies outside the mask.
    pub fn from_pixels(height: usize, width: usize, pixels: &[(usize, usize)]) -> Self {
        let mut mask = Self::new(height, width);
        for &(r, c) in pixels {
            mask.set(r, c, true);
        }
        mask
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Like [`get`](Self::get) but treats out-of-range coordinates as background.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / width, i % width))
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_dims(other.dims())?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(Self {
            height: self.height,
            width: self.width,
            bits,
        })
    }

    pub fn transpose(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |r, c| self.get(c, r))
    }

    pub(crate) fn check_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::Dimension {
                expected: self.dims(),
                actual: other,
            });
        }
        Ok(())
    }
}

/// Real-valued raster with values in `[0, 1]`: a Thick or Scored target, or
/// a predicted boundary mask read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMask {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl TargetMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    /// Rejects values outside `[0, 1]` (including NaN).
    pub fn from_values(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Format(format!(
                "{} values given for a {height}x{width} mask",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn from_binary(mask: &BinaryMask) -> Self {
        Self {
            height: mask.height,
            width: mask.width,
            values: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Pixels with a non-zero value.
    pub fn support(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|&v| v > 0.0).collect(),
        }
    }

    /// Foreground where `value >= threshold`.
    pub fn binarize(&self, threshold: f32) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }
}

/// Axis-aligned box in pixel coordinates; both corners are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl PixelBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::Domain(format!(
                "box corners out of order: ({x_min},{y_min})..({x_max},{y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min + 1
    }

    /// Number of pixels covered.
    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    /// Integer-rounded pixel rectangle of a COCO `(x, y, w, h)` box, clamped to
    /// a `height x width` image.
    ///
    /// Columns `round(x) ..= round(x + w) - 1` are covered (at least one column
    /// when `w > 0`), and likewise for rows.
    pub fn from_xywh(bbox: [f64; 4], height: usize, width: usize) -> Result<Self> {
        let [x, y, w, h] = bbox;
        if !bbox.iter().all(|v| v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::EmptyBox);
        }
        let span = |start: f64, len: f64, limit: usize| -> Option<(i64, i64)> {
            let lo = start.round() as i64;
            let hi = ((start + len).round() as i64 - 1).max(lo);
            let lo = lo.max(0);
            let hi = hi.min(limit as i64 - 1);
            (lo <= hi).then_some((lo, hi))
        };
        let (x_min, x_max) = span(x, w, width).ok_or(Error::EmptyBox)?;
        let (y_min, y_max) = span(y, h, height).ok_or(Error::EmptyBox)?;
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xywh_rounding() {
        assert_eq!(
            PixelBox::from_xywh([1.0, 1.0, 3.0, 2.0], 8, 8).unwrap(),
            PixelBox::new(1, 1, 3, 2).unwrap()
        );
        assert_eq!(
            PixelBox::from_xywh([2.0, 2.0, 1.0, 1.0], 8, 8).unwrap(),
            PixelBox::new(2, 2, 2, 2).unwrap()
        );
        // tiny but positive boxes still cover one pixel
        assert_eq!(
            PixelBox::from_xywh([3.1, 3.1, 0.2, 0.2], 8, 8).unwrap().area(),
            1
        );
        assert!(matches!(
            PixelBox::from_xywh([10.0, 10.0, 2.0, 2.0], 8, 8),
            Err(Error::EmptyBox)
        ));
        assert!(matches!(
            PixelBox::from_xywh([1.0, 1.0, 0.0, 2.0], 8, 8),
            Err(Error::EmptyBox)
        ));
        // clamped to the image
        assert_eq!(
            PixelBox::from_xywh([-2.0, 5.0, 4.0, 10.0], 8, 8).unwrap(),
            PixelBox::new(0, 5, 1, 7).unwrap()
        );
    }

    #[test]
    fn target_rejects_out_of_range() {
        assert!(TargetMask::from_values(1, 2, vec![0.5, 1.5]).is_err());
        assert!(TargetMask::from_values(1, 2, vec![0.5, f32::NAN]).is_err());
        assert!(TargetMask::from_values(1, 2, vec![0.5]).is_err());
    }
}
