//! Depth-resolved δ/ε homopair fractions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::DoubleHitPair;
use crate::stats::{binomial_ci, spearman};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Delta,
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSample {
    pub mid_z: f64,
    pub phase: Phase,
}

pub fn phase_samples(delta: &[DoubleHitPair], epsilon: &[DoubleHitPair]) -> Vec<PhaseSample> {
    delta
        .iter()
        .map(|p| PhaseSample {
            mid_z: p.mid[2],
            phase: Phase::Delta,
        })
        .chain(epsilon.iter().map(|p| PhaseSample {
            mid_z: p.mid[2],
            phase: Phase::Epsilon,
        }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-width bins over the occupied z extent.
    Count(usize),
    /// Explicit ascending edges (nm).
    Edges(Vec<f64>),
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Count(20)
    }
}

/// How reconstructed z relates to depth. With the default, z grows from the
/// top electrode towards the substrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthOrientation {
    #[default]
    ZIncreasesWithDepth,
    ZDecreasesWithDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseBin {
    pub z_lo: f64,
    pub z_hi: f64,
    pub n_delta: u64,
    pub n_epsilon: u64,
    pub frac_epsilon: Option<f64>,
    /// Wilson 95% interval for `frac_epsilon`.
    pub ci: Option<(f64, f64)>,
}

impl PhaseBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.z_lo + self.z_hi)
    }

    pub fn total(&self) -> u64 {
        self.n_delta + self.n_epsilon
    }

    pub fn frac_delta(&self) -> Option<f64> {
        self.frac_epsilon.map(|f| 1.0 - f)
    }
}

/// Bins ordered from the top electrode towards the substrate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDepthBins {
    pub bins: Vec<PhaseBin>,
    pub orientation: DepthOrientation,
    /// Samples outside explicit edges.
    pub outside: u64,
}

impl PhaseDepthBins {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_center_nm,n_delta,n_epsilon,frac_epsilon,ci_lo,ci_hi")?;
        for b in &self.bins {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                b.center(),
                b.n_delta,
                b.n_epsilon,
                opt(b.frac_epsilon),
                opt(b.ci.map(|c| c.0)),
                opt(b.ci.map(|c| c.1))
            )?;
        }
        Ok(())
    }
}

pub fn z_segment(samples: &[PhaseSample], binning: &Binning, orientation: DepthOrientation) -> Result<PhaseDepthBins> {
    if samples.iter().any(|s| !s.mid_z.is_finite()) {
        return Err(Error::invalid("pair midpoints must be finite"));
    }
    let edges = match binning {
        Binning::Count(0) => return Err(Error::invalid("need at least one depth bin")),
        Binning::Count(n) => {
            if samples.is_empty() {
                return Err(Error::invalid("cannot derive bin extent from zero pairs"));
            }
            let (lo, hi) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.mid_z), b.max(s.mid_z)));
            let hi = if hi > lo { hi } else { lo + 1.0 };
            let w = (hi - lo) / *n as f64;
            let mut e: Vec<f64> = (0..=*n).map(|i| lo + w * i as f64).collect();
            e[*n] = hi;
            e
        }
        Binning::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid("bin edges must be strictly ascending with at least two entries"));
            }
            e.clone()
        }
    };
    let nbins = edges.len() - 1;
    let mut counts = vec![(0u64, 0u64); nbins];
    let mut outside = 0;
    let last = edges[nbins];
    for s in samples {
        let z = s.mid_z;
        if z < edges[0] || z > last {
            outside += 1;
            continue;
        }
        let k = edges.partition_point(|&e| e <= z).saturating_sub(1).min(nbins - 1);
        match s.phase {
            Phase::Delta => counts[k].0 += 1,
            Phase::Epsilon => counts[k].1 += 1,
        }
    }
    let mut bins: Vec<PhaseBin> = counts
        .iter()
        .enumerate()
        .map(|(k, &(d, e))| {
            let n = d + e;
            PhaseBin {
                z_lo: edges[k],
                z_hi: edges[k + 1],
                n_delta: d,
                n_epsilon: e,
                frac_epsilon: (n > 0).then(|| e as f64 / n as f64),
                ci: (n > 0).then(|| binomial_ci(e, n, 0.95)),
            }
        })
        .collect();
    if orientation == DepthOrientation::ZDecreasesWithDepth {
        bins.reverse();
    }
    Ok(PhaseDepthBins {
        bins,
        orientation,
        outside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendDirection {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendSummary {
    /// Spearman correlation of the δ fraction with bin position, substrate to surface.
    pub spearman_rho: f64,
    pub direction: TrendDirection,
    /// Set when the δ fractions have no rank variance.
    pub ties: bool,
    pub occupied_bins: usize,
}

pub fn trend_summary(bins: &PhaseDepthBins) -> Result<TrendSummary> {
    // bins run top first, so walk them backwards for substrate -> surface
    let fracs: Vec<f64> = bins.bins.iter().rev().filter_map(|b| b.frac_delta()).collect();
    if fracs.len() < 3 {
        return Err(Error::analysis(format!(
            "trend needs at least 3 occupied bins, got {}",
            fracs.len()
        )));
    }
    let index: Vec<f64> = (0..fracs.len()).map(|i| i as f64).collect();
    let s = spearman(&index, &fracs);
    let direction = if s.rho > 0.0 {
        TrendDirection::Increasing
    } else if s.rho < 0.0 {
        TrendDirection::Decreasing
    } else {
        TrendDirection::Flat
    };
    Ok(TrendSummary {
        spearman_rho: s.rho,
        direction,
        ties: s.degenerate,
        occupied_bins: fracs.len(),
    })
}
