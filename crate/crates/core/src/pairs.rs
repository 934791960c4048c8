//! Same-pulse ion pairs: extraction from pulse bookkeeping, region-of-interest
//! filtering, detector separations, scale calibration and the clustering
//! feature matrix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apt::{IonEvent, RangeTable};
use crate::error::{Error, Result};
use crate::stats;

/// Indices of two events recorded on the same pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IonPair {
    pub a: usize,
    pub b: usize,
    /// Cumulative pulse number of the group.
    pub pulse_index: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleHitOptions {
    /// Emit every unordered pair from groups of three or more ions.
    pub pairs_from_higher: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DoubleHitExtraction {
    pub pairs: Vec<IonPair>,
    pub single_groups: usize,
    pub double_groups: usize,
    pub higher_order_groups: usize,
    /// Groups whose multiplicity field disagreed with their size; skipped.
    pub inconsistent_groups: usize,
}

/// Groups events by pulse and keeps the double hits.
///
/// An event with `pulse_delta == 0` (other than the first) joins the group
/// of the event before it. A group is consistent when its leader records a
/// multiplicity equal to the group size and every follower records either
/// the same value or 0 (the convention some exporters use for followers).
pub fn extract_double_hits(events: &[IonEvent], opts: DoubleHitOptions) -> DoubleHitExtraction {
    let mut out = DoubleHitExtraction::default();
    let mut pulse: u64 = 0;
    let mut start = 0;
    while start < events.len() {
        pulse += events[start].pulse_delta as u64;
        let mut end = start + 1;
        while end < events.len() && events[end].pulse_delta == 0 {
            end += 1;
        }
        let group = &events[start..end];
        let size = group.len();
        let consistent = group[0].multiplicity as usize == size
            && group[1..]
                .iter()
                .all(|e| e.multiplicity as usize == size || e.multiplicity == 0);
        if !consistent {
            out.inconsistent_groups += 1;
        } else {
            match size {
                1 => out.single_groups += 1,
                2 => {
                    out.double_groups += 1;
                    out.pairs.push(IonPair {
                        a: start,
                        b: start + 1,
                        pulse_index: pulse,
                    });
                }
                _ => {
                    out.higher_order_groups += 1;
                    if opts.pairs_from_higher {
                        for a in start..end {
                            for b in a + 1..end {
                                out.pairs.push(IonPair {
                                    a,
                                    b,
                                    pulse_index: pulse,
                                });
                            }
                        }
                    }
                }
            }
        }
        start = end;
    }
    if out.inconsistent_groups > 0 {
        log::warn!(
            "double hits: skipped {} pulse groups with inconsistent multiplicity",
            out.inconsistent_groups
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DetectorRegion {
    #[default]
    All,
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    Rect {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

impl DetectorRegion {
    fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            DetectorRegion::All => true,
            DetectorRegion::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
            DetectorRegion::Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            } => p[0] >= x_min && p[0] <= x_max && p[1] >= y_min && p[1] <= y_max,
        }
    }
}

/// Region of interest in detector space and depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    #[serde(default)]
    pub detector: DetectorRegion,
    /// Inclusive depth range (nm); `None` spans everything.
    #[serde(default)]
    pub z_range: Option<[f64; 2]>,
}

impl Default for Roi {
    fn default() -> Self {
        Roi::everything()
    }
}

impl Roi {
    pub fn everything() -> Self {
        Roi {
            detector: DetectorRegion::All,
            z_range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.detector {
            DetectorRegion::Disc { radius, .. } if !(radius > 0.0) => {
                return Err(Error::invalid(format!("ROI disc radius must be positive, got {radius}")))
            }
            DetectorRegion::Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            } if !(x_min < x_max && y_min < y_max) => {
                return Err(Error::invalid("ROI rectangle bounds are not ordered"))
            }
            _ => {}
        }
        if let Some([lo, hi]) = self.z_range {
            if !(lo < hi) {
                return Err(Error::invalid(format!("ROI z range [{lo}, {hi}] is not ordered")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, ev: &IonEvent) -> bool {
        if let Some([lo, hi]) = self.z_range {
            let z = ev.z as f64;
            if z < lo || z > hi {
                return false;
            }
        }
        self.detector.contains(ev.detector())
    }
}

/// Keeps pairs whose two members both fall inside `roi`.
pub fn apply_roi(pairs: &[IonPair], events: &[IonEvent], roi: &Roi) -> Vec<IonPair> {
    pairs
        .par_iter()
        .filter(|p| roi.contains(&events[p.a]) && roi.contains(&events[p.b]))
        .copied()
        .collect()
}

/// Euclidean distance between two detector hits (mm).
#[inline]
pub fn pair_separation(a: &IonEvent, b: &IonEvent) -> f64 {
    let dx = a.det_x as f64 - b.det_x as f64;
    let dy = a.det_y as f64 - b.det_y as f64;
    dx.hypot(dy)
}

/// A measured same-pulse pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleHitPair {
    pub pulse_index: u64,
    pub index_a: usize,
    pub index_b: usize,
    pub species_a: Option<usize>,
    pub species_b: Option<usize>,
    /// Detector separation (mm).
    pub det_sep: f64,
    /// Scaled separation (Å).
    pub real_sep: f64,
    /// Midpoint of the two reconstructed positions (nm).
    pub mid: [f64; 3],
}

/// Measures separations and midpoints; `real_sep = det_sep * scale`.
pub fn measure_pairs(
    pairs: &[IonPair],
    events: &[IonEvent],
    species: &[Option<usize>],
    scale: f64,
) -> Vec<DoubleHitPair> {
    pairs
        .par_iter()
        .map(|p| {
            let (ea, eb) = (&events[p.a], &events[p.b]);
            let det_sep = pair_separation(ea, eb);
            let (pa, pb) = (ea.position(), eb.position());
            DoubleHitPair {
                pulse_index: p.pulse_index,
                index_a: p.a,
                index_b: p.b,
                species_a: species[p.a],
                species_b: species[p.b],
                det_sep,
                real_sep: det_sep * scale,
                mid: [
                    0.5 * (pa[0] + pb[0]),
                    0.5 * (pa[1] + pb[1]),
                    0.5 * (pa[2] + pb[2]),
                ],
            }
        })
        .collect()
}

pub fn rescale(pairs: &mut [DoubleHitPair], scale: f64) {
    for p in pairs {
        p.real_sep = p.det_sep * scale;
    }
}

/// Scale (Å/mm) that maps the median detector separation of `reference`
/// onto `reference_median` (Å).
pub fn calibrate_scale(reference: &[DoubleHitPair], reference_median: f64) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Calibration("reference population is empty".into()));
    }
    if !(reference_median >= 0.0 && reference_median.is_finite()) {
        return Err(Error::Calibration(format!(
            "reference median must be finite and non-negative, got {reference_median}"
        )));
    }
    let seps: Vec<f64> = reference.iter().map(|p| p.det_sep).collect();
    let med = stats::median(&seps);
    if med <= 0.0 {
        return Err(Error::Calibration(
            "median detector separation of the reference population is zero".into(),
        ));
    }
    Ok(reference_median / med)
}

/// Pairs whose two members both carry `tag`.
pub fn filter_homopairs(pairs: &[DoubleHitPair], table: &RangeTable, tag: &str) -> Vec<DoubleHitPair> {
    let has = |s: Option<usize>| s.and_then(|i| table.tag_of(i)) == Some(tag);
    pairs
        .iter()
        .filter(|p| has(p.species_a) && has(p.species_b))
        .copied()
        .collect()
}

/// Counts pairs with one member tagged `tag_a` and the other `tag_b`.
pub fn count_mixed(pairs: &[DoubleHitPair], table: &RangeTable, tag_a: &str, tag_b: &str) -> usize {
    let tag = |s: Option<usize>| s.and_then(|i| table.tag_of(i));
    pairs
        .iter()
        .filter(|p| {
            let (x, y) = (tag(p.species_a), tag(p.species_b));
            (x == Some(tag_a) && y == Some(tag_b)) || (x == Some(tag_b) && y == Some(tag_a))
        })
        .count()
}

pub const FEATURE_COLUMNS: [&str; 5] = ["real_sep_A", "stoich_flag", "mid_x_nm", "mid_y_nm", "mid_z_nm"];
const FLAG_COLUMN: usize = 1;

/// Rows of `[real_sep, flag, mid_x, mid_y, mid_z]`, δ pairs (flag 0) first
/// then ε pairs (flag 1). All columns but the flag are z-scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    pub rows: Vec<[f64; 5]>,
    pub means: [f64; 5],
    pub stds: [f64; 5],
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn raw_rows(&self) -> Vec<[f64; 5]> {
        self.rows
            .iter()
            .map(|r| {
                let mut out = *r;
                for c in 0..5 {
                    if c != FLAG_COLUMN {
                        out[c] = r[c] * self.stds[c] + self.means[c];
                    }
                }
                out
            })
            .collect()
    }

    pub fn as_vecs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_vec()).collect()
    }
}

pub fn build_feature_matrix(delta: &[DoubleHitPair], epsilon: &[DoubleHitPair]) -> Result<FeatureMatrix> {
    let n = delta.len() + epsilon.len();
    if n < 2 {
        return Err(Error::invalid(format!("feature matrix needs at least 2 pairs, got {n}")));
    }
    let row = |p: &DoubleHitPair, flag: f64| [p.real_sep, flag, p.mid[0], p.mid[1], p.mid[2]];
    let mut rows: Vec<[f64; 5]> = delta
        .iter()
        .map(|p| row(p, 0.0))
        .chain(epsilon.iter().map(|p| row(p, 1.0)))
        .collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature matrix has non-finite entries"));
    }
    let mut means = [0.0; 5];
    let mut stds = [1.0; 5];
    for c in (0..5).filter(|&c| c != FLAG_COLUMN) {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        if col.iter().all(|&v| v == col[0]) {
            means[c] = col[0];
            stds[c] = 0.0;
        } else {
            means[c] = stats::mean(&col);
            stds[c] = stats::std_dev(&col);
        }
        for r in &mut rows {
            r[c] = if stds[c] > 0.0 {
                (r[c] - means[c]) / stds[c]
            } else {
                0.0
            };
        }
    }
    Ok(FeatureMatrix { rows, means, stds })
}

fn label_for(table: &RangeTable, s: Option<usize>) -> String {
    match s.and_then(|i| table.get(i)) {
        Some(r) => r.pair_tag.clone().unwrap_or_else(|| r.name.clone()),
        None => "UNRANGED".into(),
    }
}

/// Writes pairs as CSV:
/// `pulse_index,tag_a,tag_b,det_sep_mm,real_sep_A,mid_x_nm,mid_y_nm,mid_z_nm`.
pub fn write_pairs_csv<W: Write>(mut w: W, pairs: &[DoubleHitPair], table: &RangeTable) -> std::io::Result<()> {
    writeln!(w, "pulse_index,tag_a,tag_b,det_sep_mm,real_sep_A,mid_x_nm,mid_y_nm,mid_z_nm")?;
    for p in pairs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.pulse_index,
            label_for(table, p.species_a),
            label_for(table, p.species_b),
            p.det_sep,
            p.real_sep,
            p.mid[0],
            p.mid[1],
            p.mid[2]
        )?;
    }
    Ok(())
}
