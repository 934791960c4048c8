use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// JSON sidecar describing a raw little-endian f32 image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    pub pixel_scale_nm: f64,
}

/// `image.raw` -> `image.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn read_raw_f32(raw: &Path) -> Result<GrayImage> {
    let side = sidecar_path(raw);
    let meta: RawSidecar = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)
        .map_err(|e| Error::Config(format!("{}: {e}", side.display())))?;
    let bytes = fs::read(raw).map_err(|e| Error::io(raw, e))?;
    let expect = meta.width * meta.height * 4;
    if bytes.len() != expect {
        return Err(Error::invalid(format!(
            "{} holds {} bytes, sidecar implies {expect}",
            raw.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    GrayImage::new(meta.width, meta.height, meta.pixel_scale_nm, data)
}

/// Raw bytes and sidecar JSON for an image; intensities are narrowed to f32.
pub fn write_raw_f32(img: &GrayImage) -> (Vec<u8>, String) {
    let bytes = img.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    let meta = RawSidecar {
        width: img.width,
        height: img.height,
        pixel_scale_nm: img.pixel_scale,
    };
    (bytes, serde_json::to_string_pretty(&meta).expect("sidecar serializes"))
}

/// 16-bit (or 8-bit) grayscale PNG; intensities are the raw integer levels.
pub fn read_png16(path: &Path, pixel_scale: f64) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let luma = img.into_luma16();
    let (w, h) = luma.dimensions();
    let data = luma.into_raw().into_iter().map(f64::from).collect();
    GrayImage::new(w as usize, h as usize, pixel_scale, data)
}
