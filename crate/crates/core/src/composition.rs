//! Voxelized concentration maps and depth profiles over ranged ions.
//!
//! Molecular ions contribute their full composition to elemental counts
//! (one NbN ion counts as one Nb and one N atom).

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apt::{IonEvent, RangeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Per-range ion counts on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelGrid {
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub n_species: usize,
    /// Flattened `[ix][iy][iz][species]`.
    counts: Vec<u64>,
    /// Ranged ions that fell outside the grid.
    pub dropped: u64,
}

impl VoxelGrid {
    fn empty(origin: [f64; 3], voxel_size: f64, dims: [usize; 3], n_species: usize) -> Self {
        VoxelGrid {
            origin,
            voxel_size,
            dims,
            n_species,
            counts: vec![0; dims[0] * dims[1] * dims[2] * n_species],
            dropped: 0,
        }
    }

    #[inline]
    fn offset(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ((ix * self.dims[1] + iy) * self.dims[2] + iz) * self.n_species
    }

    pub fn count(&self, ix: usize, iy: usize, iz: usize, species: usize) -> u64 {
        self.counts[self.offset(ix, iy, iz) + species]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn species_total(&self, species: usize) -> u64 {
        self.counts.iter().skip(species).step_by(self.n_species).sum()
    }

    fn voxel_of(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    /// Adds another grid with identical geometry.
    pub fn merge(&mut self, other: &VoxelGrid) {
        assert_eq!(self.dims, other.dims);
        assert_eq!(self.n_species, other.n_species);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.dropped += other.dropped;
    }

    /// Writes non-zero voxels as `ix,iy,iz,species,count`.
    pub fn write_csv<W: Write>(&self, mut w: W, table: &RangeTable) -> std::io::Result<()> {
        writeln!(w, "ix,iy,iz,species,count")?;
        for ix in 0..self.dims[0] {
            for iy in 0..self.dims[1] {
                for iz in 0..self.dims[2] {
                    let off = self.offset(ix, iy, iz);
                    for s in 0..self.n_species {
                        let c = self.counts[off + s];
                        if c > 0 {
                            let name = table.get(s).map_or("?", |r| r.name.as_str());
                            writeln!(w, "{ix},{iy},{iz},{name},{c}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bins ranged ions into cubic voxels of side `voxel_size` (nm).
///
/// Without explicit bounds the grid covers every ranged ion, with its
/// origin snapped down to a multiple of the voxel size.
pub fn voxelize(
    events: &[IonEvent],
    species: &[Option<usize>],
    table: &RangeTable,
    voxel_size: f64,
    bounds: Option<GridBounds>,
) -> Result<VoxelGrid> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::invalid(format!("voxel size must be positive, got {voxel_size}")));
    }
    if events.len() != species.len() {
        return Err(Error::invalid("species assignments do not match events"));
    }
    let (origin, dims) = match bounds {
        Some(b) => {
            let mut dims = [0usize; 3];
            for (a, dim) in dims.iter_mut().enumerate() {
                if !(b.max[a] > b.min[a]) {
                    return Err(Error::invalid("grid bounds are not ordered"));
                }
                *dim = ((b.max[a] - b.min[a]) / voxel_size).ceil() as usize;
            }
            (b.min, dims)
        }
        None => {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for (e, s) in events.iter().zip(species) {
                if s.is_some() {
                    let p = e.position();
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
            }
            if !lo[0].is_finite() {
                return Ok(VoxelGrid::empty([0.0; 3], voxel_size, [0; 3], table.len()));
            }
            let mut origin = [0.0; 3];
            let mut dims = [0usize; 3];
            for a in 0..3 {
                origin[a] = (lo[a] / voxel_size).floor() * voxel_size;
                dims[a] = ((hi[a] - origin[a]) / voxel_size).floor() as usize + 1;
            }
            (origin, dims)
        }
    };

    let template = VoxelGrid::empty(origin, voxel_size, dims, table.len());
    const CHUNK: usize = 1 << 16;
    let grid = events
        .par_chunks(CHUNK)
        .zip(species.par_chunks(CHUNK))
        .fold(
            || template.clone(),
            |mut g, (evs, sps)| {
                for (e, s) in evs.iter().zip(sps) {
                    let Some(s) = *s else { continue };
                    match g.voxel_of(e.position()) {
                        Some([ix, iy, iz]) => {
                            let off = g.offset(ix, iy, iz) + s;
                            g.counts[off] += 1;
                        }
                        None => g.dropped += 1,
                    }
                }
                g
            },
        )
        .reduce(
            || template.clone(),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioMapOptions {
    pub numerator: Vec<String>,
    pub denominator: Vec<String>,
    pub axis: Axis,
    /// Columns with fewer denominator atoms than this are masked.
    pub mask_threshold: f64,
    /// Optional per-element detection efficiency; counts are divided by it.
    #[serde(default)]
    pub efficiency: BTreeMap<String, f64>,
}

impl Default for RatioMapOptions {
    fn default() -> Self {
        RatioMapOptions {
            numerator: vec!["Nb".into()],
            denominator: vec!["N".into()],
            axis: Axis::Z,
            mask_threshold: 10.0,
            efficiency: BTreeMap::new(),
        }
    }
}

/// Projected elemental ratio; row-major over the two remaining axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioMap {
    pub axes: [usize; 2],
    pub shape: [usize; 2],
    pub origin: [f64; 2],
    pub voxel_size: f64,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// `None` where the column is masked.
    pub ratio: Vec<Option<f64>>,
}

impl RatioMap {
    pub fn at(&self, u: usize, v: usize) -> Option<f64> {
        self.ratio[u * self.shape[1] + v]
    }

    pub fn unmasked(&self) -> impl Iterator<Item = f64> + '_ {
        self.ratio.iter().flatten().copied()
    }

    /// Writes the ratio matrix as CSV (rows = first axis); masked cells are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for u in 0..self.shape[0] {
            let row: Vec<String> = (0..self.shape[1])
                .map(|v| self.at(u, v).map(|r| r.to_string()).unwrap_or_default())
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn header_json(&self) -> serde_json::Value {
        let axis_name = |a: usize| ["x", "y", "z"][a];
        serde_json::json!({
            "axes": [axis_name(self.axes[0]), axis_name(self.axes[1])],
            "shape": self.shape,
            "origin_nm": self.origin,
            "voxel_size_nm": self.voxel_size,
            "mask": self.ratio.iter().map(|r| r.is_none()).collect::<Vec<_>>(),
        })
    }
}

fn element_weights(table: &RangeTable, elements: &[String], efficiency: &BTreeMap<String, f64>) -> (Vec<f64>, Vec<f64>) {
    // (efficiency-corrected, raw) atoms per ion for each range
    table
        .ranges()
        .iter()
        .map(|r| {
            let mut corrected = 0.0;
            let mut raw = 0.0;
            for el in elements {
                let n = r.count_of(el) as f64;
                raw += n;
                corrected += n / efficiency.get(el).copied().unwrap_or(1.0);
            }
            (corrected, raw)
        })
        .unzip()
}

pub fn ratio_map_2d(grid: &VoxelGrid, table: &RangeTable, opts: &RatioMapOptions) -> Result<RatioMap> {
    if let Some((el, e)) = opts.efficiency.iter().find(|(_, &e)| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::invalid(format!("detection efficiency for {el} must be in (0, 1], got {e}")));
    }
    let (num_w, _) = element_weights(table, &opts.numerator, &opts.efficiency);
    let (den_w, den_raw) = element_weights(table, &opts.denominator, &opts.efficiency);
    let p = opts.axis.index();
    let axes = match p {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    };
    let shape = [grid.dims[axes[0]], grid.dims[axes[1]]];
    let cells = shape[0] * shape[1];
    let mut num = vec![0.0; cells];
    let mut den = vec![0.0; cells];
    let mut den_atoms = vec![0.0; cells];
    for ix in 0..grid.dims[0] {
        for iy in 0..grid.dims[1] {
            for iz in 0..grid.dims[2] {
                let idx = [ix, iy, iz];
                let cell = idx[axes[0]] * shape[1] + idx[axes[1]];
                let off = grid.offset(ix, iy, iz);
                for s in 0..grid.n_species {
                    let c = grid.counts[off + s] as f64;
                    if c > 0.0 {
                        num[cell] += c * num_w[s];
                        den[cell] += c * den_w[s];
                        den_atoms[cell] += c * den_raw[s];
                    }
                }
            }
        }
    }
    let ratio = num
        .iter()
        .zip(&den)
        .zip(&den_atoms)
        .map(|((n, d), raw)| (*raw >= opts.mask_threshold && *d > 0.0).then(|| n / d))
        .collect();
    Ok(RatioMap {
        axes,
        shape,
        origin: [grid.origin[axes[0]], grid.origin[axes[1]]],
        voxel_size: grid.voxel_size,
        numerator: num,
        denominator: den,
        ratio,
    })
}

/// Atomic fractions along z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub elements: Vec<String>,
    pub bin_width: f64,
    /// Lower edge of the first bin (nm).
    pub start: f64,
    pub centers: Vec<f64>,
    /// Ranged ions per bin.
    pub ion_counts: Vec<u64>,
    /// Atoms per element per bin, `[bin][element]`.
    pub atom_counts: Vec<Vec<u64>>,
    /// Atomic fraction per element per bin; `None` for empty bins.
    pub fractions: Vec<Option<Vec<f64>>>,
}

impl DepthProfile {
    pub fn element_index(&self, el: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == el)
    }

    pub fn fraction_series(&self, el: &str) -> Vec<Option<f64>> {
        let Some(k) = self.element_index(el) else {
            return vec![None; self.centers.len()];
        };
        self.fractions.iter().map(|f| f.as_ref().map(|v| v[k])).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "z_center_nm,ion_count")?;
        for el in &self.elements {
            write!(w, ",{el}")?;
        }
        writeln!(w)?;
        for (i, c) in self.centers.iter().enumerate() {
            write!(w, "{c},{}", self.ion_counts[i])?;
            for k in 0..self.elements.len() {
                match &self.fractions[i] {
                    Some(f) => write!(w, ",{}", f[k])?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Depth profile with bins of `bin_width` nm whose edges sit at
/// `edge_origin + k * bin_width`.
pub fn depth_profile(
    events: &[IonEvent],
    species: &[Option<usize>],
    table: &RangeTable,
    bin_width: f64,
    edge_origin: f64,
) -> Result<DepthProfile> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if events.len() != species.len() {
        return Err(Error::invalid("species assignments do not match events"));
    }
    let elements = table.elements().to_vec();
    let comp: Vec<Vec<u64>> = table
        .ranges()
        .iter()
        .map(|r| elements.iter().map(|e| r.count_of(e) as u64).collect())
        .collect();
    let bin_of = |z: f64| ((z - edge_origin) / bin_width).floor() as i64;
    let ranged = events.iter().zip(species).filter(|(_, s)| s.is_some());
    let (lo, hi) = ranged
        .clone()
        .fold((i64::MAX, i64::MIN), |(lo, hi), (e, _)| {
            let b = bin_of(e.z as f64);
            (lo.min(b), hi.max(b))
        });
    if lo > hi {
        return Ok(DepthProfile {
            elements,
            bin_width,
            start: edge_origin,
            centers: vec![],
            ion_counts: vec![],
            atom_counts: vec![],
            fractions: vec![],
        });
    }
    let nbins = (hi - lo + 1) as usize;
    let mut ion_counts = vec![0u64; nbins];
    let mut atom_counts = vec![vec![0u64; elements.len()]; nbins];
    for (e, s) in ranged {
        let b = (bin_of(e.z as f64) - lo) as usize;
        ion_counts[b] += 1;
        for (acc, n) in atom_counts[b].iter_mut().zip(&comp[s.unwrap()]) {
            *acc += n;
        }
    }
    let start = edge_origin + lo as f64 * bin_width;
    let centers = (0..nbins).map(|i| start + (i as f64 + 0.5) * bin_width).collect();
    let fractions = atom_counts
        .iter()
        .map(|atoms| {
            let total: u64 = atoms.iter().sum();
            (total > 0).then(|| atoms.iter().map(|&a| a as f64 / total as f64).collect())
        })
        .collect();
    Ok(DepthProfile {
        elements,
        bin_width,
        start,
        centers,
        ion_counts,
        atom_counts,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apt::SpeciesRange;

    fn table() -> RangeTable {
        RangeTable::new(
            vec![
                SpeciesRange::new(13.8, 14.3, vec![("N".into(), 1)]),
                SpeciesRange::new(92.5, 93.5, vec![("Nb".into(), 1)]),
                SpeciesRange::new(106.4, 107.4, vec![("Nb".into(), 1), ("N".into(), 1)]),
            ],
            vec!["Nb".into(), "N".into()],
        )
        .unwrap()
    }

    fn ion(p: [f32; 3], mz: f32) -> IonEvent {
        IonEvent {
            x: p[0],
            y: p[1],
            z: p[2],
            mz,
            tof: 0.0,
            v_dc: 0.0,
            det_x: 0.0,
            det_y: 0.0,
            pulse_delta: 1,
            multiplicity: 1,
        }
    }

    #[test]
    fn single_ion_at_origin() {
        let t = table();
        let evs = vec![ion([0.0, 0.0, 0.0], 14.0)];
        let sp = crate::apt::assign_all(&evs, &t);
        let g = voxelize(&evs, &sp, &t, 1.0, None).unwrap();
        assert_eq!(g.dims, [1, 1, 1]);
        assert_eq!(g.total(), 1);
        assert_eq!(g.count(0, 0, 0, 0), 1);
    }

    #[test]
    fn conservation_and_dropping() {
        let t = table();
        let evs: Vec<_> = (0..100)
            .map(|i| ion([(i % 10) as f32 * 0.7, (i / 10) as f32 * 0.3, i as f32 * 0.1], 93.0))
            .chain(std::iter::once(ion([0.0, 0.0, 0.0], 50.0)))
            .collect();
        let sp = crate::apt::assign_all(&evs, &t);
        let g = voxelize(&evs, &sp, &t, 0.5, None).unwrap();
        assert_eq!(g.total(), 100);
        assert_eq!(g.dropped, 0);
        let b = GridBounds {
            min: [0.0; 3],
            max: [10.0, 10.0, 5.0],
        };
        let g = voxelize(&evs, &sp, &t, 0.5, Some(b)).unwrap();
        assert_eq!(g.total() + g.dropped, 100);
        assert_eq!(g.dropped, 50);
    }

    #[test]
    fn ratio_masks_empty_denominator() {
        let t = table();
        // Nb-only column at x=0, NbN column at x=1
        let mut evs = vec![];
        for k in 0..20 {
            evs.push(ion([0.5, 0.5, k as f32 * 0.1], 93.0));
            evs.push(ion([1.5, 0.5, k as f32 * 0.1], 107.0));
        }
        let sp = crate::apt::assign_all(&evs, &t);
        let g = voxelize(&evs, &sp, &t, 1.0, None).unwrap();
        let m = ratio_map_2d(&g, &t, &RatioMapOptions::default()).unwrap();
        assert_eq!(m.shape, [2, 1]);
        assert_eq!(m.at(0, 0), None);
        assert_eq!(m.at(1, 0), Some(1.0));
        assert!(m.unmasked().all(|r| r.is_finite()));
    }

    #[test]
    fn efficiency_scales_denominator() {
        let t = table();
        let evs: Vec<_> = (0..40).map(|k| ion([0.5, 0.5, k as f32 * 0.1], 107.0)).collect();
        let sp = crate::apt::assign_all(&evs, &t);
        let g = voxelize(&evs, &sp, &t, 1.0, None).unwrap();
        let mut opts = RatioMapOptions::default();
        opts.efficiency.insert("N".into(), 0.5);
        let m = ratio_map_2d(&g, &t, &opts).unwrap();
        assert_eq!(m.at(0, 0), Some(0.5));
        opts.efficiency.insert("N".into(), 0.0);
        assert!(ratio_map_2d(&g, &t, &opts).is_err());
    }

    #[test]
    fn single_species_profile() {
        let t = table();
        let evs: Vec<_> = (0..30).map(|k| ion([0.0, 0.0, k as f32], 93.0)).collect();
        let sp = crate::apt::assign_all(&evs, &t);
        let p = depth_profile(&evs, &sp, &t, 2.0, 0.0).unwrap();
        assert_eq!(p.centers.len(), 15);
        for f in p.fraction_series("Nb") {
            assert_eq!(f, Some(1.0));
        }
    }

    #[test]
    fn empty_bins_masked() {
        let t = table();
        let evs = vec![ion([0.0, 0.0, 0.5], 14.0), ion([0.0, 0.0, 4.5], 107.0)];
        let sp = crate::apt::assign_all(&evs, &t);
        let p = depth_profile(&evs, &sp, &t, 1.0, 0.0).unwrap();
        assert_eq!(p.centers, vec![0.5, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(p.fractions[2], None);
        assert_eq!(p.ion_counts[2], 0);
        assert_eq!(p.fractions[4], Some(vec![0.5, 0.5]));
    }

    #[test]
    fn bad_parameters() {
        let t = table();
        assert!(voxelize(&[], &[], &t, 0.0, None).is_err());
        assert!(depth_profile(&[], &[], &t, -1.0, 0.0).is_err());
        assert!(depth_profile(&[], &[], &t, 1.0, 0.0).unwrap().centers.is_empty());
    }
}
