use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{envelope, estimate_d, estimate_d_from_spectrum, parallel_profiles, ProfileSpectrum};
use super::{fft2, spot_filter_ifft, FringeWindow, GrayImage, SpotMask};
use crate::cluster::kmeans;
use crate::error::{Error, Result};
use crate::stats::{boxplot_stats, mean, median, quantile, std_dev, BoxStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    /// Line profiles of the spot-filtered real-space window.
    #[default]
    RealSpace,
    /// Radial ray through the window's 2D spectrum.
    Spectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowOptions {
    pub source: ProfileSource,
    /// Fixed spot mask; by default a pair of discs around the dominant peak.
    pub spot_mask: Option<SpotMask>,
    pub mask_radius_bins: f64,
    /// Spectral peaks closer than this to DC are ignored.
    pub min_radius_bins: f64,
    /// Profile direction; by default along the dominant wave vector.
    pub direction: Option<[f64; 2]>,
    pub n_profiles: usize,
    pub profile_offset_px: f64,
    pub smooth_window: usize,
    pub n_features: usize,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            source: ProfileSource::RealSpace,
            spot_mask: None,
            mask_radius_bins: 6.0,
            min_radius_bins: 4.0,
            direction: None,
            n_profiles: 9,
            profile_offset_px: 4.0,
            smooth_window: 3,
            n_features: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    LowEnvelope,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DSpacingSample {
    pub window_id: usize,
    pub x0: usize,
    pub y0: usize,
    pub d_nm: f64,
    pub peak_amplitude: f64,
    pub peak_to_median: f64,
    pub envelope_energy: f64,
    pub modulation_depth: f64,
    pub envelope: Vec<f64>,
    pub cluster: Option<usize>,
    pub rejection: Option<Rejection>,
}

/// Dominant non-DC peak of the centred spectrum, in the upper half plane.
fn dominant_peak(spec: &super::Spectrum, min_radius: f64) -> Option<(i64, i64)> {
    let h = (spec.side / 2) as i64;
    let mut best: Option<((i64, i64), f64)> = None;
    for ky in 0..h {
        for kx in -h + 1..h {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let r = ((kx * kx + ky * ky) as f64).sqrt();
            if r < min_radius || r >= h as f64 {
                continue;
            }
            let m = spec.magnitude(kx, ky);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some(((kx, ky), m));
            }
        }
    }
    best.map(|b| b.0)
}

/// d-spacing and envelope features for one window of `img`.
///
/// The fringe test runs on unfiltered profiles; the spot filter narrows the
/// band before the d estimate and the envelope.
pub fn analyze_window(img: &GrayImage, window: &FringeWindow, opts: &WindowOptions) -> Result<DSpacingSample> {
    let w = img.crop(window)?.subtract_mean();
    let spec = fft2(&w);
    let peak = dominant_peak(&spec, opts.min_radius_bins)
        .ok_or_else(|| Error::invalid(format!("window {} is too small for a spectral peak", window.id)))?;
    let dir = opts.direction.unwrap_or([peak.0 as f64, peak.1 as f64]);
    let raw = parallel_profiles(&w, dir, opts.n_profiles, opts.profile_offset_px)?;
    let gate = estimate_d(&raw)?;

    let mask = opts
        .spot_mask
        .clone()
        .unwrap_or_else(|| SpotMask::default().with_pair(peak.0 as f64, peak.1 as f64, opts.mask_radius_bins));
    let filtered = spot_filter_ifft(&spec, &mask)?;
    let profiles = parallel_profiles(&filtered.image, dir, opts.n_profiles, opts.profile_offset_px)?;
    let est = match opts.source {
        ProfileSource::RealSpace => ProfileSpectrum::new(&profiles)?.peak().unwrap_or(gate),
        ProfileSource::Spectrum => estimate_d_from_spectrum(&spec, dir)?,
    };

    let mut features = vec![0.0; opts.n_features];
    let mut energy = 0.0;
    let mut depth = 0.0;
    for p in &profiles {
        let e = envelope(p, opts.smooth_window, opts.n_features)?;
        for (f, v) in features.iter_mut().zip(&e.features) {
            *f += v;
        }
        energy += e.energy;
        depth += e.modulation_depth;
    }
    let n = profiles.len() as f64;
    features.iter_mut().for_each(|f| *f /= n);
    Ok(DSpacingSample {
        window_id: window.id,
        x0: window.x0,
        y0: window.y0,
        d_nm: est.d_nm,
        peak_amplitude: est.peak_amplitude,
        peak_to_median: gate.peak_to_median,
        envelope_energy: energy / n,
        modulation_depth: depth / n,
        envelope: features,
        cluster: None,
        rejection: None,
    })
}

/// Runs every window in parallel; windows without fringes are returned separately.
pub fn analyze_windows(
    img: &GrayImage,
    windows: &[FringeWindow],
    opts: &WindowOptions,
) -> Result<(Vec<DSpacingSample>, Vec<FringeWindow>)> {
    let results: Vec<Result<DSpacingSample>> = windows.par_iter().map(|w| analyze_window(img, w, opts)).collect();
    let mut ok = Vec::new();
    let mut none = Vec::new();
    for (w, r) in windows.iter().zip(results) {
        match r {
            Ok(s) => ok.push(s),
            Err(Error::NoFringe { .. }) => none.push(*w),
            Err(e) => return Err(e),
        }
    }
    Ok((ok, none))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    pub k: usize,
    /// Samples below this percentile of envelope energy are dropped.
    pub energy_percentile: f64,
    pub clip_nm: [f64; 2],
    pub seed: u64,
    pub n_init: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k: 3,
            energy_percentile: 20.0,
            clip_nm: [0.10, 0.30],
            seed: 0,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub n: usize,
    pub d_nm: BoxStats,
    pub mean_modulation_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeClustering {
    pub samples: Vec<DSpacingSample>,
    /// Ordered by ascending median d.
    pub clusters: Vec<ClusterSummary>,
    pub energy_threshold: f64,
    pub inertia: f64,
}

impl FringeClustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &DSpacingSample> {
        self.samples.iter().filter(move |s| s.cluster == Some(cluster))
    }

    /// One row per window, including windows that showed no fringes.
    pub fn write_csv<W: Write>(&self, no_fringe: &[FringeWindow], mut w: W) -> std::io::Result<()> {
        writeln!(w, "window_id,x0_px,y0_px,d_nm,envelope_energy,cluster,status")?;
        let mut rows: Vec<(usize, String)> = self
            .samples
            .iter()
            .map(|s| {
                let (cluster, status) = match (s.cluster, s.rejection) {
                    (Some(c), _) => (c as i64, "ok"),
                    (None, Some(Rejection::LowEnvelope)) => (-1, "low_envelope"),
                    (None, Some(Rejection::OutOfRange)) => (-1, "out_of_range"),
                    (None, None) => (-1, "unassigned"),
                };
                (
                    s.window_id,
                    format!(
                        "{},{},{},{},{},{},{}",
                        s.window_id, s.x0, s.y0, s.d_nm, s.envelope_energy, cluster, status
                    ),
                )
            })
            .collect();
        rows.extend(
            no_fringe
                .iter()
                .map(|f| (f.id, format!("{},{},{},,,-1,no_fringe", f.id, f.x0, f.y0))),
        );
        rows.sort_by_key(|r| r.0);
        for (_, r) in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }
}

fn zscore_columns(rows: &mut [Vec<f64>]) {
    let ncol = rows[0].len();
    for c in 0..ncol {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let m = mean(&col);
        let s = std_dev(&col);
        let s = if s > 0.0 { s } else { 1.0 };
        for r in rows.iter_mut() {
            r[c] = (r[c] - m) / s;
        }
    }
}

/// Filters, clusters and summarizes window samples.
///
/// Features per window are `[d, modulation depth, envelope...]`, each column
/// z-scored; the envelope block is scaled by `1/sqrt(len)` so that it weighs
/// as much as a single scalar feature.
pub fn cluster_windows(samples: &[DSpacingSample], opts: &ClusterOptions) -> Result<FringeClustering> {
    if opts.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(0.0..=100.0).contains(&opts.energy_percentile) {
        return Err(Error::invalid("energy percentile must lie in [0, 100]"));
    }
    if !(opts.clip_nm[0] < opts.clip_nm[1]) {
        return Err(Error::invalid("clip range must be ascending"));
    }
    let mut out: Vec<DSpacingSample> = samples.to_vec();
    out.sort_by_key(|s| s.window_id);
    let energies: Vec<f64> = out.iter().map(|s| s.envelope_energy).collect();
    let threshold = if energies.is_empty() {
        0.0
    } else {
        quantile(&energies, opts.energy_percentile / 100.0)
    };
    for s in out.iter_mut() {
        s.cluster = None;
        s.rejection = if s.envelope_energy < threshold {
            Some(Rejection::LowEnvelope)
        } else if !(s.d_nm >= opts.clip_nm[0] && s.d_nm <= opts.clip_nm[1]) {
            Some(Rejection::OutOfRange)
        } else {
            None
        };
    }
    let kept: Vec<usize> = (0..out.len()).filter(|&i| out[i].rejection.is_none()).collect();
    if kept.len() < opts.k {
        return Err(Error::analysis(format!(
            "{} windows survive filtering, fewer than k = {}",
            kept.len(),
            opts.k
        )));
    }
    let env_len = out[kept[0]].envelope.len();
    if kept.iter().any(|&i| out[i].envelope.len() != env_len) {
        return Err(Error::invalid("envelope feature lengths differ between windows"));
    }
    let mut rows: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| {
            let s = &out[i];
            let mut r = Vec::with_capacity(env_len + 2);
            r.push(s.d_nm);
            r.push(s.modulation_depth);
            r.extend_from_slice(&s.envelope);
            r
        })
        .collect();
    zscore_columns(&mut rows);
    let w = 1.0 / (env_len.max(1) as f64).sqrt();
    for r in rows.iter_mut() {
        r[2..].iter_mut().for_each(|v| *v *= w);
    }

    let best = (0..opts.n_init.max(1))
        .map(|i| kmeans(&rows, opts.k, opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)))
        .min_by(|a, b| a.inertia.total_cmp(&b.inertia))
        .expect("at least one restart");

    // relabel clusters by ascending median d, ties by first member
    let mut groups: Vec<(usize, Vec<usize>)> = (0..opts.k).map(|c| (c, Vec::new())).collect();
    for (row, &i) in kept.iter().enumerate() {
        let c = best.labels.get(row).expect("k-means labels every point");
        groups[c].1.push(i);
    }
    groups.retain(|g| !g.1.is_empty());
    let med = |g: &Vec<usize>| median(&g.iter().map(|&i| out[i].d_nm).collect::<Vec<_>>());
    groups.sort_by(|a, b| med(&a.1).total_cmp(&med(&b.1)).then(a.1[0].cmp(&b.1[0])));

    let mut clusters = Vec::with_capacity(groups.len());
    for (label, (_, members)) in groups.iter().enumerate() {
        for &i in members {
            out[i].cluster = Some(label);
        }
        let d: Vec<f64> = members.iter().map(|&i| out[i].d_nm).collect();
        let m: Vec<f64> = members.iter().map(|&i| out[i].modulation_depth).collect();
        clusters.push(ClusterSummary {
            cluster: label,
            n: members.len(),
            d_nm: boxplot_stats(&d),
            mean_modulation_depth: mean(&m),
        });
    }
    Ok(FringeClustering {
        samples: out,
        clusters,
        energy_threshold: threshold,
        inertia: best.inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fringe_image(side: usize, scale: f64, periods: &[(f64, f64, f64)]) -> GrayImage {
        let data = (0..side * side)
            .map(|i| {
                let (x, y) = ((i % side) as f64 * scale, (i / side) as f64 * scale);
                periods
                    .iter()
                    .map(|&(d, theta, a)| a * (2.0 * PI * (x * theta.cos() + y * theta.sin()) / d).cos())
                    .sum()
            })
            .collect();
        GrayImage::new(side, side, scale, data).unwrap()
    }

    fn whole(img: &GrayImage) -> FringeWindow {
        FringeWindow {
            id: 0,
            x0: 0,
            y0: 0,
            side: img.width,
        }
    }

    #[test]
    fn single_period_window() {
        let img = fringe_image(256, 0.02, &[(0.159, 0.3, 1.0)]);
        let s = analyze_window(&img, &whole(&img), &WindowOptions::default()).unwrap();
        assert!((s.d_nm - 0.159).abs() < 0.002, "{}", s.d_nm);
        assert_eq!(s.envelope.len(), 64);
        assert!(s.modulation_depth < 0.1);
        let opts = WindowOptions {
            source: ProfileSource::Spectrum,
            ..Default::default()
        };
        let r = analyze_window(&img, &whole(&img), &opts).unwrap();
        assert!((r.d_nm - 0.159).abs() < 0.006, "{}", r.d_nm);
    }

    #[test]
    fn beat_raises_modulation_depth() {
        let pure = fringe_image(256, 0.02, &[(0.159, 0.0, 1.0)]);
        let mixed = fringe_image(256, 0.02, &[(0.159, 0.0, 1.0), (0.144, 0.0, 0.7)]);
        let a = analyze_window(&pure, &whole(&pure), &WindowOptions::default()).unwrap();
        let b = analyze_window(&mixed, &whole(&mixed), &WindowOptions::default()).unwrap();
        assert!(b.modulation_depth > 3.0 * a.modulation_depth.max(0.05));
    }

    #[test]
    fn one_spot_pair_suppresses_the_other_period() {
        // 0.16 nm -> 16 bins, 0.128 nm -> 20 bins on 128 px at 0.02 nm/px
        let img = fringe_image(128, 0.02, &[(0.16, 0.0, 1.0), (0.128, 0.0, 1.0)]);
        let mask = SpotMask::default().with_pair(16.0, 0.0, 1.5);
        let f = spot_filter_ifft(&fft2(&img), &mask).unwrap();
        let s = fft2(&f.image);
        let keep = s.magnitude(16, 0).powi(2);
        let drop = s.magnitude(20, 0).powi(2);
        assert!(drop < 0.01 * keep);
    }

    fn sample(id: usize, d: f64, energy: f64) -> DSpacingSample {
        DSpacingSample {
            window_id: id,
            x0: 0,
            y0: 0,
            d_nm: d,
            peak_amplitude: 1.0,
            peak_to_median: 10.0,
            envelope_energy: energy,
            modulation_depth: 0.0,
            envelope: vec![1.0; 4],
            cluster: None,
            rejection: None,
        }
    }

    #[test]
    fn clip_rejects_artifact() {
        let mut s: Vec<_> = (0..10).map(|i| sample(i, 0.15 + 0.001 * i as f64, 1.0)).collect();
        s.push(sample(10, 0.35, 1.0));
        let opts = ClusterOptions {
            k: 1,
            energy_percentile: 0.0,
            ..Default::default()
        };
        let c = cluster_windows(&s, &opts).unwrap();
        assert_eq!(c.samples[10].rejection, Some(Rejection::OutOfRange));
        assert_eq!(c.clusters[0].n, 10);
    }

    #[test]
    fn identical_windows_single_cluster() {
        let s: Vec<_> = (0..12).map(|i| sample(i, 0.159, 1.0)).collect();
        let opts = ClusterOptions {
            k: 1,
            ..Default::default()
        };
        let c = cluster_windows(&s, &opts).unwrap();
        assert_eq!(c.clusters.len(), 1);
        let b = &c.clusters[0].d_nm;
        assert_eq!(b.whisker_high - b.whisker_low, 0.0);
        assert_eq!(b.q3 - b.q1, 0.0);
    }

    #[test]
    fn energy_percentile_and_too_few() {
        let s: Vec<_> = (0..10).map(|i| sample(i, 0.15, i as f64)).collect();
        let c = cluster_windows(
            &s,
            &ClusterOptions {
                k: 2,
                energy_percentile: 50.0,
                ..Default::default()
            },
        )
        .unwrap();
        let low = c.samples.iter().filter(|s| s.rejection == Some(Rejection::LowEnvelope)).count();
        assert_eq!(low, 5);
        let err = cluster_windows(
            &s[..3],
            &ClusterOptions {
                k: 3,
                energy_percentile: 50.0,
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn clusters_ordered_by_d_and_deterministic() {
        let mut s = Vec::new();
        for i in 0..20 {
            s.push(sample(i, 0.144 + 1e-4 * (i % 3) as f64, 1.0));
            s.push(sample(100 + i, 0.159 + 1e-4 * (i % 3) as f64, 1.0));
        }
        let opts = ClusterOptions {
            k: 2,
            energy_percentile: 0.0,
            seed: 9,
            ..Default::default()
        };
        let a = cluster_windows(&s, &opts).unwrap();
        let b = cluster_windows(&s, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.clusters[0].d_nm.median < 0.15 && a.clusters[1].d_nm.median > 0.15);
        let mut csv = Vec::new();
        a.write_csv(&[FringeWindow { id: 50, x0: 1, y0: 2, side: 8 }], &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.contains("50,1,2,,,-1,no_fringe"));
        assert_eq!(text.lines().count(), 42);
    }
}
