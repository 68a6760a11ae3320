//! Mask files.
//!
//! BSMK is bit-exact: the ASCII magic `BSMK`, a version byte (`0x01`), height
//! and width as little-endian `u32`, then `height * width` little-endian `f32`
//! values in row-major order. PNG is 8-bit grayscale holding
//! `round(255 * value)`, so values read back are quantized to multiples of
//! 1/255.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, TargetMask};

pub const BSMK_MAGIC: &[u8; 4] = b"BSMK";
pub const BSMK_VERSION: u8 = 1;
const BSMK_HEADER: usize = 4 + 1 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskFormat {
    Bsmk,
    Png,
}

impl MaskFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MaskFormat::Bsmk => "bsmk",
            MaskFormat::Png => "png",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "bsmk" => Some(MaskFormat::Bsmk),
            "png" => Some(MaskFormat::Png),
            _ => None,
        }
    }
}

pub fn encode_bsmk(mask: &TargetMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(BSMK_HEADER + 4 * mask.values().len());
    out.extend_from_slice(BSMK_MAGIC);
    out.push(BSMK_VERSION);
    out.extend_from_slice(&(mask.height() as u32).to_le_bytes());
    out.extend_from_slice(&(mask.width() as u32).to_le_bytes());
    for v in mask.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_bsmk(bytes: &[u8]) -> Result<TargetMask> {
    if bytes.len() < BSMK_HEADER || &bytes[..4] != BSMK_MAGIC {
        return Err(Error::Format("not a BSMK file".into()));
    }
    if bytes[4] != BSMK_VERSION {
        return Err(Error::Format(format!("unsupported BSMK version {}", bytes[4])));
    }
    let height = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let body = &bytes[BSMK_HEADER..];
    if body.len() != 4 * height * width {
        return Err(Error::Format(format!(
            "BSMK body has {} bytes, expected {}",
            body.len(),
            4 * height * width
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    TargetMask::from_values(height, width, values)
}

pub fn to_gray(mask: &TargetMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([(mask.get(y as usize, x as usize) * 255.0).round() as u8])
    })
}

pub fn from_gray(img: &GrayImage) -> TargetMask {
    let values = img.pixels().map(|p| p.0[0] as f32 / 255.0).collect();
    TargetMask::from_values(img.height() as usize, img.width() as usize, values)
        .expect("8-bit values lie in [0, 1]")
}

pub fn encode_png(mask: &TargetMask) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    to_gray(mask).write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<TargetMask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    Ok(from_gray(&img.to_luma8()))
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_target(path: &Path, mask: &TargetMask, format: MaskFormat) -> Result<()> {
    let bytes = match format {
        MaskFormat::Bsmk => encode_bsmk(mask),
        MaskFormat::Png => encode_png(mask)?,
    };
    write_atomic(path, &bytes)
}

/// Binary masks are written as {0, 1} targets: {0, 255} in PNG.
pub fn write_binary(path: &Path, mask: &BinaryMask, format: MaskFormat) -> Result<()> {
    write_target(path, &TargetMask::from_binary(mask), format)
}

/// Format is chosen by extension.
pub fn read_target(path: &Path) -> Result<TargetMask> {
    let bytes = fs::read(path)?;
    match MaskFormat::from_path(path) {
        Some(MaskFormat::Bsmk) => decode_bsmk(&bytes),
        Some(MaskFormat::Png) => decode_png(&bytes),
        None => Err(Error::Format(format!(
            "{}: unknown mask extension",
            path.display()
        ))),
    }
}
