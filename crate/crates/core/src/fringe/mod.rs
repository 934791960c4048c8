//! Lattice-fringe analysis of TEM images: windowed 2D FFT, spot-mask
//! filtering, line profiles, envelopes, d-spacing estimation and k-means
//! grouping of windows.

mod fft;
mod image_io;
mod pipeline;
mod profile;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{fft2, spot_filter_ifft, Filtered, Spectrum, Spot, SpotMask};
pub use image_io::{read_png16, read_raw_f32, sidecar_path, write_raw_f32, RawSidecar};
pub use pipeline::{
    analyze_window, analyze_windows, cluster_windows, ClusterOptions, ClusterSummary, DSpacingSample, FringeClustering,
    ProfileSource, Rejection, WindowOptions,
};
pub use profile::{
    envelope, estimate_d, estimate_d_from_spectrum, line_profile, parallel_profiles, DEstimate, Envelope, LineProfile,
    ProfileSpectrum, PEAK_TO_MEDIAN,
};

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// nm per pixel.
    pub pixel_scale: f64,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixel_scale: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image data has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        if !(pixel_scale > 0.0 && pixel_scale.is_finite()) {
            return Err(Error::invalid(format!("pixel scale must be positive, got {pixel_scale}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image intensities must be finite"));
        }
        Ok(GrayImage {
            width,
            height,
            pixel_scale,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at fractional pixel coordinates; `None` outside.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let eps = 1e-9;
        if !(x >= -eps && y >= -eps && x <= self.width as f64 - 1.0 + eps && y <= self.height as f64 - 1.0 + eps) {
            return None;
        }
        let x = x.clamp(0.0, self.width as f64 - 1.0);
        let y = y.clamp(0.0, self.height as f64 - 1.0);
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bot * fy)
    }

    pub fn crop(&self, w: &FringeWindow) -> Result<GrayImage> {
        if w.x0 + w.side > self.width || w.y0 + w.side > self.height {
            return Err(Error::invalid(format!(
                "window {} at ({}, {}) side {} exceeds the {}x{} image",
                w.id, w.x0, w.y0, w.side, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w.side * w.side);
        for y in w.y0..w.y0 + w.side {
            data.extend_from_slice(&self.data[y * self.width + w.x0..y * self.width + w.x0 + w.side]);
        }
        Ok(GrayImage {
            width: w.side,
            height: w.side,
            pixel_scale: self.pixel_scale,
            data,
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn subtract_mean(&self) -> GrayImage {
        let m = self.mean();
        GrayImage {
            data: self.data.iter().map(|v| v - m).collect(),
            ..self.clone()
        }
    }
}

/// Square analysis window in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FringeWindow {
    pub id: usize,
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
}

/// Smallest power of two covering `window_nm` at `pixel_scale` nm/px.
pub fn window_side_px(window_nm: f64, pixel_scale: f64) -> usize {
    let px = (window_nm / pixel_scale).ceil().max(1.0) as usize;
    px.next_power_of_two()
}

/// `count` windows at seeded uniform positions fully inside the image.
pub fn random_windows(img: &GrayImage, side: usize, count: usize, seed: u64) -> Result<Vec<FringeWindow>> {
    if side > img.width || side > img.height {
        return Err(Error::invalid(format!(
            "window side {side} px exceeds the {}x{} image",
            img.width, img.height
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|id| FringeWindow {
            id,
            x0: rng.random_range(0..=img.width - side),
            y0: rng.random_range(0..=img.height - side),
            side,
        })
        .collect())
}

/// Non-overlapping tiling from the top-left corner, row by row.
pub fn grid_windows(img: &GrayImage, side: usize) -> Vec<FringeWindow> {
    let mut out = Vec::new();
    for ty in 0..img.height / side {
        for tx in 0..img.width / side {
            out.push(FringeWindow {
                id: out.len(),
                x0: tx * side,
                y0: ty * side,
                side,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_side_rounding() {
        assert_eq!(window_side_px(4.5, 0.02), 256);
        assert_eq!(window_side_px(4.5, 0.05), 128);
        assert_eq!(window_side_px(4.5, 4.5), 1);
    }

    #[test]
    fn windows_stay_inside() {
        let img = GrayImage::new(300, 280, 0.02, vec![0.0; 300 * 280]).unwrap();
        for w in random_windows(&img, 256, 50, 3).unwrap() {
            assert!(w.x0 + 256 <= 300 && w.y0 + 256 <= 280);
            assert!(img.crop(&w).is_ok());
        }
        assert_eq!(grid_windows(&img, 128).len(), 4);
        assert!(random_windows(&img, 512, 1, 0).is_err());
    }

    #[test]
    fn bilinear() {
        let img = GrayImage::new(2, 2, 1.0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(img.sample(0.5, 0.5), Some(1.5));
        assert_eq!(img.sample(1.0, 1.0), Some(3.0));
        assert_eq!(img.sample(1.5, 0.0), None);
    }
}
