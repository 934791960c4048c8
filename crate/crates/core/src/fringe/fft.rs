use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// Centred 2D spectrum of a square, power-of-two window.
///
/// Element `(row, col)` holds frequency `(ky, kx) = (row - side/2, col - side/2)`
/// in cycles per window side; DC sits at `(side/2, side/2)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub side: usize,
    pub pixel_scale: f64,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    #[inline]
    pub fn index(&self, kx: i64, ky: i64) -> usize {
        let h = (self.side / 2) as i64;
        ((ky + h) as usize) * self.side + (kx + h) as usize
    }

    pub fn at(&self, kx: i64, ky: i64) -> Complex64 {
        self.data[self.index(kx, ky)]
    }

    pub fn magnitude(&self, kx: i64, ky: i64) -> f64 {
        self.at(kx, ky).norm()
    }

    /// Sum of |coefficient|².
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Bin spacing in cycles per nm.
    pub fn bin_frequency(&self) -> f64 {
        1.0 / (self.side as f64 * self.pixel_scale)
    }
}

fn transform_2d(data: &mut [Complex64], side: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(side, direction);
    for row in data.chunks_exact_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = data[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            data[r * side + c] = col[r];
        }
    }
}

/// Swaps quadrants so index 0 moves to the centre (even sides only).
fn shift(data: &[Complex64], side: usize) -> Vec<Complex64> {
    let h = side / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..side {
        for c in 0..side {
            out[((r + h) % side) * side + (c + h) % side] = data[r * side + c];
        }
    }
    out
}

/// Forward 2D DFT, zero-padding the window to the next power-of-two square.
pub fn fft2(window: &GrayImage) -> Spectrum {
    let side = window.width.max(window.height).next_power_of_two().max(2);
    let mut data = vec![Complex64::new(0.0, 0.0); side * side];
    for y in 0..window.height {
        for x in 0..window.width {
            data[y * side + x] = Complex64::new(window.get(x, y), 0.0);
        }
    }
    transform_2d(&mut data, side, FftDirection::Forward);
    Spectrum {
        side,
        pixel_scale: window.pixel_scale,
        data: shift(&data, side),
    }
}

/// Circular pass region in frequency bins relative to DC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub kx: f64,
    pub ky: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpotMask {
    pub spots: Vec<Spot>,
}

impl SpotMask {
    pub fn all_pass() -> Self {
        SpotMask {
            spots: vec![Spot {
                kx: 0.0,
                ky: 0.0,
                radius: f64::INFINITY,
            }],
        }
    }

    pub fn dc_only() -> Self {
        SpotMask {
            spots: vec![Spot {
                kx: 0.0,
                ky: 0.0,
                radius: 0.5,
            }],
        }
    }

    /// Adds a spot and its mirror through DC.
    pub fn with_pair(mut self, kx: f64, ky: f64, radius: f64) -> Self {
        self.spots.push(Spot { kx, ky, radius });
        self.spots.push(Spot {
            kx: -kx,
            ky: -ky,
            radius,
        });
        self
    }

    /// Pass flags in the centred layout of a `side`-sized spectrum.
    pub fn rasterize(&self, side: usize) -> Vec<bool> {
        let h = (side / 2) as i64;
        let mut out = vec![false; side * side];
        for r in 0..side {
            for c in 0..side {
                let ky = r as f64 - h as f64;
                let kx = c as f64 - h as f64;
                out[r * side + c] = self.spots.iter().any(|s| {
                    let dx = kx - s.kx;
                    let dy = ky - s.ky;
                    dx * dx + dy * dy <= s.radius * s.radius
                });
            }
        }
        out
    }
}

fn negated_index(r: usize, c: usize, side: usize) -> usize {
    // k -> -k modulo side in the centred layout
    let h = side / 2;
    let neg = |i: usize| (side - ((i + h) % side)) % side;
    let back = |k: usize| (k + h) % side;
    back(neg(r)) * side + back(neg(c))
}

#[derive(Debug, Clone)]
pub struct Filtered {
    pub image: GrayImage,
    /// Largest |imaginary| of the inverse transform relative to the real output norm.
    pub imag_residue: f64,
}

/// Keeps only the spectrum inside `mask` and transforms back to real space.
pub fn spot_filter_ifft(spectrum: &Spectrum, mask: &SpotMask) -> Result<Filtered> {
    let side = spectrum.side;
    let pass = mask.rasterize(side);
    for r in 0..side {
        for c in 0..side {
            if pass[r * side + c] != pass[negated_index(r, c, side)] {
                return Err(Error::invalid(format!(
                    "spot mask is not symmetric under frequency negation at (kx, ky) = ({}, {})",
                    c as i64 - (side / 2) as i64,
                    r as i64 - (side / 2) as i64
                )));
            }
        }
    }
    let masked: Vec<Complex64> = spectrum
        .data
        .iter()
        .zip(&pass)
        .map(|(&z, &p)| if p { z } else { Complex64::new(0.0, 0.0) })
        .collect();
    // the centred layout is its own inverse shift for even sides
    let mut data = shift(&masked, side);
    transform_2d(&mut data, side, FftDirection::Inverse);
    let norm = (side * side) as f64;
    let real: Vec<f64> = data.iter().map(|z| z.re / norm).collect();
    let max_imag = data.iter().map(|z| (z.im / norm).abs()).fold(0.0, f64::max);
    let rnorm = real.iter().map(|v| v * v).sum::<f64>().sqrt();
    let imag_residue = if rnorm > 0.0 { max_imag / rnorm } else { max_imag };
    Ok(Filtered {
        image: GrayImage {
            width: side,
            height: side,
            pixel_scale: spectrum.pixel_scale,
            data: real,
        },
        imag_residue,
    })
}
