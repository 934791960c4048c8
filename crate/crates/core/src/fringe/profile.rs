use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{GrayImage, Spectrum};
use crate::error::{Error, Result};
use crate::stats::{mean, median, std_dev};

/// Minimum ratio of the spectral peak to the spectral median for a window to count as fringed.
pub const PEAK_TO_MEDIAN: f64 = 3.0;

const ZERO_PAD: usize = 4;
/// Lowest searched frequency, in unpadded bins, to stay clear of DC leakage.
const MIN_BIN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineProfile {
    /// Sample spacing along the line (nm).
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl LineProfile {
    /// Sample positions (nm) measured from the line centre.
    pub fn positions(&self) -> Vec<f64> {
        let h = (self.values.len() as f64 - 1.0) / 2.0;
        (0..self.values.len()).map(|i| (i as f64 - h) * self.spacing).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if self.values.is_empty() { 0.0 } else { hi - lo }
    }
}

fn unit(direction: [f64; 2]) -> Result<[f64; 2]> {
    let n = direction[0].hypot(direction[1]);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid("profile direction must be a finite non-zero vector"));
    }
    Ok([direction[0] / n, direction[1] / n])
}

/// Largest t with `center ± t·dir` inside `[0, w-1] x [0, h-1]`.
fn symmetric_extent(center: [f64; 2], dir: [f64; 2], w: usize, h: usize) -> f64 {
    let mut t = f64::INFINITY;
    for (c, d, size) in [(center[0], dir[0], w), (center[1], dir[1], h)] {
        if d.abs() > 1e-12 {
            let room = c.min(size as f64 - 1.0 - c);
            t = t.min(room / d.abs());
        } else if c < 0.0 || c > size as f64 - 1.0 {
            return -1.0;
        }
    }
    t
}

fn sample_line(img: &GrayImage, center: [f64; 2], dir: [f64; 2], half: usize) -> Vec<f64> {
    (0..=2 * half)
        .map(|i| {
            let t = i as f64 - half as f64;
            img.sample(center[0] + t * dir[0], center[1] + t * dir[1]).unwrap_or(0.0)
        })
        .collect()
}

/// Profile along `direction` through the window centre, one sample per pixel step.
pub fn line_profile(img: &GrayImage, direction: [f64; 2]) -> Result<LineProfile> {
    Ok(parallel_profiles(img, direction, 1, 0.0)?.remove(0))
}

/// `count` equally long profiles parallel to `direction`, offset from the centre
/// line by multiples of `offset_px` along the perpendicular.
pub fn parallel_profiles(img: &GrayImage, direction: [f64; 2], count: usize, offset_px: f64) -> Result<Vec<LineProfile>> {
    let dir = unit(direction)?;
    if count == 0 {
        return Err(Error::invalid("need at least one profile"));
    }
    let perp = [-dir[1], dir[0]];
    let c = [(img.width as f64 - 1.0) / 2.0, (img.height as f64 - 1.0) / 2.0];
    let centers: Vec<[f64; 2]> = (0..count)
        .map(|i| {
            let o = (i as f64 - (count as f64 - 1.0) / 2.0) * offset_px;
            [c[0] + o * perp[0], c[1] + o * perp[1]]
        })
        .collect();
    let ext = centers
        .iter()
        .map(|&p| symmetric_extent(p, dir, img.width, img.height))
        .fold(f64::INFINITY, f64::min);
    if !(ext >= 1.0) {
        return Err(Error::invalid(format!(
            "profiles of {count} lines at {offset_px} px spacing do not fit in a {}x{} window",
            img.width, img.height
        )));
    }
    let half = (ext + 1e-9).floor() as usize;
    Ok(centers
        .into_iter()
        .map(|p| LineProfile {
            spacing: img.pixel_scale,
            values: sample_line(img, p, dir, half),
        })
        .collect())
}

/// Averaged one-sided amplitude spectrum of a set of equal-length profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSpectrum {
    /// Cycles per nm.
    pub frequencies: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// First bin considered by the peak search.
    pub search_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DEstimate {
    pub d_nm: f64,
    /// Interpolated peak frequency (cycles per nm).
    pub frequency: f64,
    pub peak_amplitude: f64,
    pub peak_to_median: f64,
}

/// Parabola vertex offset through three samples, in (-0.5, 0.5).
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / den).clamp(-0.5, 0.5)
}

impl ProfileSpectrum {
    pub fn new(profiles: &[LineProfile]) -> Result<Self> {
        let first = profiles.first().ok_or_else(|| Error::invalid("no profiles to transform"))?;
        let len = first.len();
        if profiles.iter().any(|p| p.len() != len || p.spacing != first.spacing) {
            return Err(Error::invalid("profiles must share length and spacing"));
        }
        if len < 2 * MIN_BIN + 2 {
            return Err(Error::invalid(format!("profile of {len} samples is too short")));
        }
        let nfft = len.next_power_of_two() * ZERO_PAD;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
        let hann: Vec<f64> = (0..len)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos())
            .collect();
        let half = nfft / 2;
        let mut power = vec![0.0; half + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for p in profiles {
            let m = mean(&p.values);
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (i, v) in p.values.iter().enumerate() {
                buf[i] = Complex64::new((v - m) * hann[i], 0.0);
            }
            fft.process(&mut buf);
            for (k, pw) in power.iter_mut().enumerate() {
                *pw += buf[k].norm_sqr();
            }
        }
        let n = profiles.len() as f64;
        let df = 1.0 / (nfft as f64 * first.spacing);
        Ok(ProfileSpectrum {
            frequencies: (0..=half).map(|k| k as f64 * df).collect(),
            magnitude: power.iter().map(|p| (p / n).sqrt()).collect(),
            search_start: (MIN_BIN * nfft).div_ceil(len),
        })
    }

    /// Dominant peak without the qualification test.
    pub fn peak(&self) -> Option<DEstimate> {
        let last = self.magnitude.len().checked_sub(1)?;
        let (k, &peak) = self.magnitude[self.search_start..last]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
        let k = k + self.search_start;
        if peak <= 0.0 {
            return None;
        }
        let ln = |v: f64| v.max(f64::MIN_POSITIVE).ln();
        let off = parabola_offset(ln(self.magnitude[k - 1]), ln(peak), ln(self.magnitude[k + 1]));
        let df = self.frequencies[1];
        let f = (k as f64 + off) * df;
        let med = median(&self.magnitude[self.search_start..]);
        Some(DEstimate {
            d_nm: 1.0 / f,
            frequency: f,
            peak_amplitude: peak,
            peak_to_median: if med > 0.0 { peak / med } else { f64::INFINITY },
        })
    }
}

/// d-spacing from the dominant peak of the averaged profile spectrum.
pub fn estimate_d(profiles: &[LineProfile]) -> Result<DEstimate> {
    let spec = ProfileSpectrum::new(profiles)?;
    match spec.peak() {
        Some(e) if e.peak_to_median >= PEAK_TO_MEDIAN => Ok(e),
        Some(e) => Err(Error::NoFringe {
            ratio: e.peak_to_median,
            threshold: PEAK_TO_MEDIAN,
        }),
        None => Err(Error::NoFringe {
            ratio: 0.0,
            threshold: PEAK_TO_MEDIAN,
        }),
    }
}

/// d-spacing from the magnitude along a radial ray of a centred 2D spectrum.
pub fn estimate_d_from_spectrum(spectrum: &Spectrum, direction: [f64; 2]) -> Result<DEstimate> {
    let dir = unit(direction)?;
    let side = spectrum.side;
    let h = (side / 2) as f64;
    let mag = |kx: f64, ky: f64| -> f64 {
        let (x, y) = (kx + h, ky + h);
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let at = |c: f64, r: f64| {
            let (c, r) = (c as i64, r as i64);
            if c < 0 || r < 0 || c >= side as i64 || r >= side as i64 {
                0.0
            } else {
                spectrum.data[r as usize * side + c as usize].norm()
            }
        };
        (at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx) * (1.0 - fy)
            + (at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx) * fy
    };
    let step = 0.25;
    let n = ((h - 1.0) / step).floor() as usize;
    let ray: Vec<f64> = (0..=n).map(|i| mag(i as f64 * step * dir[0], i as f64 * step * dir[1])).collect();
    let start = (MIN_BIN as f64 / step) as usize;
    if ray.len() < start + 3 {
        return Err(Error::invalid("spectrum too small for a radial estimate"));
    }
    let (k, &peak) = ray[start..ray.len() - 1]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty ray");
    let k = k + start;
    let med = median(&ray[start..]);
    let ratio = if med > 0.0 { peak / med } else if peak > 0.0 { f64::INFINITY } else { 0.0 };
    if !(ratio >= PEAK_TO_MEDIAN) {
        return Err(Error::NoFringe {
            ratio,
            threshold: PEAK_TO_MEDIAN,
        });
    }
    let ln = |v: f64| v.max(f64::MIN_POSITIVE).ln();
    let off = parabola_offset(ln(ray[k - 1]), ln(peak), ln(ray[k + 1]));
    let f = (k as f64 + off) * step * spectrum.bin_frequency();
    Ok(DEstimate {
        d_nm: 1.0 / f,
        frequency: f,
        peak_amplitude: peak,
        peak_to_median: ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub smoothed: Vec<f64>,
    pub upper: Vec<f64>,
    /// `upper` resampled to a fixed length.
    pub features: Vec<f64>,
    /// Mean square of the upper envelope.
    pub energy: f64,
    /// Standard deviation over mean of the upper envelope.
    pub modulation_depth: f64,
}

fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut prefix = vec![0.0; v.len() + 1];
    for (i, x) in v.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn resample(v: &[f64], n: usize) -> Vec<f64> {
    if n == 1 || v.len() == 1 {
        return vec![v[0]; n];
    }
    let scale = (v.len() - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|j| {
            let x = j as f64 * scale;
            let i = (x.floor() as usize).min(v.len() - 2);
            let f = x - i as f64;
            v[i] * (1.0 - f) + v[i + 1] * f
        })
        .collect()
}

/// Moving-average smoothing, then the upper envelope through local maxima.
pub fn envelope(profile: &LineProfile, smooth_window: usize, n_features: usize) -> Result<Envelope> {
    if smooth_window == 0 || smooth_window.is_multiple_of(2) {
        return Err(Error::invalid(format!("smooth window must be odd and >= 1, got {smooth_window}")));
    }
    if n_features == 0 {
        return Err(Error::invalid("feature length must be positive"));
    }
    if profile.len() < smooth_window || profile.is_empty() {
        return Err(Error::invalid(format!(
            "profile of {} samples is shorter than the smooth window {smooth_window}",
            profile.len()
        )));
    }
    let s = moving_average(&profile.values, smooth_window);
    let n = s.len();
    let peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| s[i] >= s[i - 1] && s[i] > s[i + 1])
        .collect();
    let mut upper = s.clone();
    if !peaks.is_empty() {
        for (i, u) in upper.iter_mut().enumerate() {
            let j = peaks.partition_point(|&p| p <= i);
            let e = if j == 0 {
                s[peaks[0]]
            } else if j == peaks.len() {
                s[peaks[j - 1]]
            } else {
                let (a, b) = (peaks[j - 1], peaks[j]);
                let f = (i - a) as f64 / (b - a) as f64;
                s[a] * (1.0 - f) + s[b] * f
            };
            *u = e.max(s[i]);
        }
    }
    let energy = upper.iter().map(|u| u * u).sum::<f64>() / n as f64;
    let m = mean(&upper);
    let modulation_depth = if n > 1 && m.abs() > 0.0 {
        std_dev(&upper) / m.abs()
    } else {
        0.0
    };
    Ok(Envelope {
        features: resample(&upper, n_features),
        smoothed: s,
        upper,
        energy,
        modulation_depth,
    })
}
