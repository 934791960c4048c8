use serde::{Deserialize, Serialize};

use super::{quantile_sorted, sorted_copy, std_dev};
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    #[default]
    Auto,
    Fixed(f64),
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone)]
pub struct Kde {
    samples: Vec<f64>,
    bandwidth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KdeGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde {
    pub fn new(samples: &[f64], bandwidth: Bandwidth) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("kde needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("kde samples must be finite"));
        }
        let h = match bandwidth {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => return Err(Error::invalid(format!("kde bandwidth must be positive, got {h}"))),
            Bandwidth::Auto => silverman(samples),
        };
        Ok(Kde {
            samples: samples.to_vec(),
            bandwidth: h,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .samples
            .iter()
            .map(|s| {
                let u = (x - s) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (h * self.samples.len() as f64)
    }

    /// Evaluates on `points` evenly spaced nodes spanning the sample range
    /// padded by `pad_bandwidths` bandwidths on each side.
    pub fn grid(&self, points: usize, pad_bandwidths: f64) -> KdeGrid {
        let points = points.max(2);
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let lo = lo - pad_bandwidths * self.bandwidth;
        let hi = hi + pad_bandwidths * self.bandwidth;
        let step = (hi - lo) / (points - 1) as f64;
        let x: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let density = x.iter().map(|&v| self.density(v)).collect();
        KdeGrid { x, density }
    }
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, falling back to a tiny
/// mean-relative width when the sample has no spread.
fn silverman(samples: &[f64]) -> f64 {
    let sorted = sorted_copy(samples);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = std_dev(samples).min(iqr / 1.34);
    if spread > 0.0 {
        0.9 * spread * (samples.len() as f64).powf(-0.2)
    } else {
        let mean = super::mean(samples);
        let h = 1e-3 * mean.abs() + 1e-12;
        log::warn!("kde: sample has zero spread, falling back to bandwidth {h:e}");
        h
    }
}
