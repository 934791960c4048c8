//! Seeded generators that plant known ground truth: atom-probe specimens,
//! lattice-fringe images, I-V traces and R-A sets.
//!
//! Every generator draws from ChaCha8 streams whose seeds are derived from
//! one root seed and a stage name (first 8 bytes, little endian, of
//! SHA-256 over the root seed's little-endian bytes followed by the name),
//! so outputs are bit-reproducible.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apt::{IonEvent, RangeTable, SpeciesRange};
use crate::error::{Error, Result};
use crate::fringe::GrayImage;
use crate::transport::{IvTrace, RaPoint};

pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let h = Sha256::new().chain_update(root.to_le_bytes()).chain_update(stage.as_bytes()).finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&h[..8]);
    u64::from_le_bytes(b)
}

pub fn stage_rng(root: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stage))
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd.max(0.0)).expect("finite standard deviation")
}

/// The range table used by the synthetic specimens.
pub fn default_range_table() -> RangeTable {
    let c = |pairs: &[(&str, u32)]| pairs.iter().map(|&(e, n)| (e.to_string(), n)).collect::<Vec<_>>();
    let ranges = vec![
        SpeciesRange::new(13.8, 14.3, c(&[("N", 1)])),
        SpeciesRange::new(15.8, 16.3, c(&[("O", 1)])),
        SpeciesRange::new(26.8, 27.3, c(&[("Al", 1)])),
        SpeciesRange::new(30.8, 31.2, c(&[("Nb", 1)])),
        SpeciesRange::new(46.2, 46.7, c(&[("Nb", 1)])),
        SpeciesRange::new(106.4, 107.4, c(&[("Nb", 1), ("N", 1)])).with_tag("R3"),
        SpeciesRange::new(213.3, 214.3, c(&[("Nb", 2), ("N", 2)])).with_tag("R18"),
    ];
    let mut ranges = ranges;
    ranges[3].name = "Nb3+".into();
    ranges[4].name = "Nb2+".into();
    let elements = ["N", "O", "Al", "Nb"].iter().map(|s| s.to_string()).collect();
    RangeTable::new(ranges, elements).expect("built-in range table is valid")
}

/// Finds a range by tag first, then by name.
fn range_index(table: &RangeTable, key: &str) -> Result<usize> {
    table
        .index_of_tag(key)
        .or_else(|| table.index_of_name(key))
        .ok_or_else(|| Error::invalid(format!("no range named or tagged `{key}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    /// [top, bottom) in nm; z grows with depth.
    pub z: [f64; 2],
    /// Range name or tag with its relative ion weight.
    pub species: Vec<(String, f64)>,
}

/// Pairs of one species with lognormal true separations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPopulation {
    pub species: String,
    pub count: usize,
    pub median_sep_a: f64,
    /// Standard deviation of ln(separation).
    pub sigma_log: f64,
    pub z: [f64; 2],
}

/// Pairs whose species switches between two populations with a fraction
/// that varies linearly in z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMixture {
    pub species: [String; 2],
    pub count: usize,
    pub z: [f64; 2],
    /// Fraction of the second species at `z[0]` and at `z[1]`.
    pub second_fraction: [f64; 2],
    pub median_sep_a: [f64; 2],
    pub sigma_log: f64,
}

impl PairMixture {
    pub fn fraction_at(&self, z: f64) -> f64 {
        let t = ((z - self.z[0]) / (self.z[1] - self.z[0])).clamp(0.0, 1.0);
        self.second_fraction[0] + t * (self.second_fraction[1] - self.second_fraction[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecimenSpec {
    pub seed: u64,
    pub layers: Vec<Layer>,
    /// Lateral half-width of the square specimen (nm).
    pub half_width_nm: f64,
    pub background_ions: usize,
    pub pairs: Vec<PairPopulation>,
    pub mixtures: Vec<PairMixture>,
    /// Same-pulse triples of background species.
    pub triples: usize,
    /// Å of specimen per mm on the detector.
    pub magnification: f64,
    /// Detector mm per nm of lateral position.
    pub detector_mm_per_nm: f64,
}

impl Default for SpecimenSpec {
    fn default() -> Self {
        SpecimenSpec::trilayer()
    }
}

/// Ion weights giving Nb:N = 1:1 with 1 at.% oxygen.
fn nbn_species() -> Vec<(String, f64)> {
    let o = 0.015 / 1.015;
    let rest = 1.0 - o;
    vec![
        ("R3".into(), 0.5 * rest),
        ("Nb3+".into(), 0.15 * rest),
        ("Nb2+".into(), 0.10 * rest),
        ("N".into(), 0.25 * rest),
        ("O".into(), o),
    ]
}

impl SpecimenSpec {
    /// NbN / AlN / NbN stack with an 8 at.% oxygen barrier and the δ/ε
    /// pair populations.
    pub fn trilayer() -> Self {
        SpecimenSpec {
            seed: 1,
            layers: vec![
                Layer {
                    name: "top".into(),
                    z: [0.0, 48.0],
                    species: nbn_species(),
                },
                Layer {
                    name: "barrier".into(),
                    z: [48.0, 52.0],
                    species: vec![("Al".into(), 0.46), ("N".into(), 0.46), ("O".into(), 0.08)],
                },
                Layer {
                    name: "bottom".into(),
                    z: [52.0, 100.0],
                    species: nbn_species(),
                },
            ],
            half_width_nm: 20.0,
            background_ions: 100_000,
            pairs: vec![
                PairPopulation {
                    species: "R3".into(),
                    count: 2000,
                    median_sep_a: 2.77,
                    sigma_log: 0.08,
                    z: [0.0, 100.0],
                },
                PairPopulation {
                    species: "R18".into(),
                    count: 100,
                    median_sep_a: 2.35,
                    sigma_log: 0.08,
                    z: [0.0, 100.0],
                },
            ],
            mixtures: vec![],
            triples: 0,
            magnification: 277.0,
            detector_mm_per_nm: 1.0,
        }
    }

    /// Pairs only, with the ε fraction rising linearly from the surface to
    /// the substrate.
    pub fn depth_gradient(count: usize, surface_fraction: f64, substrate_fraction: f64) -> Self {
        SpecimenSpec {
            background_ions: 0,
            pairs: vec![],
            mixtures: vec![PairMixture {
                species: ["R3".into(), "R18".into()],
                count,
                z: [0.0, 100.0],
                second_fraction: [surface_fraction, substrate_fraction],
                median_sep_a: [2.77, 2.35],
                sigma_log: 0.08,
            }],
            ..SpecimenSpec::trilayer()
        }
    }

    pub fn validate(&self, table: &RangeTable) -> Result<()> {
        if !(self.magnification > 0.0 && self.magnification.is_finite()) {
            return Err(Error::invalid("magnification must be positive"));
        }
        if !(self.detector_mm_per_nm > 0.0 && self.half_width_nm > 0.0) {
            return Err(Error::invalid("detector scale and half width must be positive"));
        }
        let mut layers: Vec<&Layer> = self.layers.iter().collect();
        layers.sort_by(|a, b| a.z[0].total_cmp(&b.z[0]));
        for l in &layers {
            if !(l.z[0] < l.z[1]) {
                return Err(Error::invalid(format!("layer {} has an empty z range", l.name)));
            }
            if l.species.is_empty() || l.species.iter().any(|s| !(s.1 >= 0.0)) {
                return Err(Error::invalid(format!("layer {} needs non-negative species weights", l.name)));
            }
            for (s, _) in &l.species {
                range_index(table, s)?;
            }
        }
        for w in layers.windows(2) {
            if w[1].z[0] < w[0].z[1] {
                return Err(Error::invalid(format!("layers {} and {} overlap", w[0].name, w[1].name)));
            }
        }
        if self.background_ions + self.triples > 0 && layers.is_empty() {
            return Err(Error::invalid("background ions need at least one layer"));
        }
        for p in &self.pairs {
            range_index(table, &p.species)?;
            if !(p.median_sep_a > 0.0 && p.sigma_log >= 0.0 && p.z[0] <= p.z[1]) {
                return Err(Error::invalid(format!("invalid pair population for {}", p.species)));
            }
        }
        for m in &self.mixtures {
            range_index(table, &m.species[0])?;
            range_index(table, &m.species[1])?;
            let f = m.second_fraction;
            if !(m.z[0] < m.z[1] && (0.0..=1.0).contains(&f[0]) && (0.0..=1.0).contains(&f[1])) {
                return Err(Error::invalid("invalid pair mixture"));
            }
            if !(m.median_sep_a[0] > 0.0 && m.median_sep_a[1] > 0.0 && m.sigma_log >= 0.0) {
                return Err(Error::invalid("pair mixture separations must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub index_a: usize,
    pub index_b: usize,
    pub species: String,
    pub true_sep_a: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecimenTruth {
    pub seed: u64,
    pub magnification: f64,
    pub range_names: Vec<String>,
    /// Range index of every emitted event.
    pub event_species: Vec<usize>,
    pub pairs: Vec<PlantedPair>,
    /// Event indices of same-pulse triples.
    pub triples: Vec<[usize; 3]>,
    pub mixtures: Vec<PairMixture>,
}

impl SpecimenTruth {
    pub fn pairs_of<'a>(&'a self, species: &'a str) -> impl Iterator<Item = &'a PlantedPair> {
        self.pairs.iter().filter(move |p| p.species == species)
    }
}

struct Hit {
    pos: [f64; 3],
    det: [f64; 2],
    species: usize,
}

struct Group {
    z: f64,
    hits: Vec<Hit>,
    pair: Option<(String, f64)>,
}

fn mz_in(rng: &mut ChaCha8Rng, r: &SpeciesRange) -> f64 {
    let c = 0.5 * (r.mz_low + r.mz_high);
    let h = 0.3 * (r.mz_high - r.mz_low);
    c + rng.random_range(-h..h)
}

fn sep_draw(rng: &mut ChaCha8Rng, median: f64, sigma_log: f64) -> f64 {
    (median.ln() + normal(sigma_log).sample(rng)).exp()
}

/// Trilayer point cloud with planted same-pulse pairs, plus its truth record.
///
/// Events are ordered by depth, which stands in for acquisition order.
/// A planted pair's members share z and lie `true_sep / magnification` mm
/// apart on the detector in a random direction.
pub fn gen_apt_specimen(spec: &SpecimenSpec, table: &RangeTable) -> Result<(Vec<IonEvent>, SpecimenTruth)> {
    spec.validate(table)?;
    let root = spec.seed;
    let k = spec.detector_mm_per_nm;
    let hw = spec.half_width_nm;
    let mut groups: Vec<Group> = Vec::new();

    let mut layers: Vec<&Layer> = spec.layers.iter().collect();
    layers.sort_by(|a, b| a.z[0].total_cmp(&b.z[0]));
    let thickness: f64 = layers.iter().map(|l| l.z[1] - l.z[0]).sum();
    let layer_species: Vec<(Vec<usize>, Vec<f64>)> = layers
        .iter()
        .map(|l| {
            let idx = l.species.iter().map(|(s, _)| range_index(table, s).expect("validated")).collect();
            let total: f64 = l.species.iter().map(|s| s.1).sum();
            let mut acc = 0.0;
            let cdf = l
                .species
                .iter()
                .map(|s| {
                    acc += s.1 / total;
                    acc
                })
                .collect();
            (idx, cdf)
        })
        .collect();
    let background_hit = |rng: &mut ChaCha8Rng| -> Hit {
        let mut t = rng.random_range(0.0..thickness);
        let mut li = 0;
        while li + 1 < layers.len() && t >= layers[li].z[1] - layers[li].z[0] {
            t -= layers[li].z[1] - layers[li].z[0];
            li += 1;
        }
        let z = layers[li].z[0] + t;
        let (idx, cdf) = &layer_species[li];
        let u: f64 = rng.random();
        let s = idx[cdf.partition_point(|&c| c <= u).min(idx.len() - 1)];
        let (x, y) = (rng.random_range(-hw..hw), rng.random_range(-hw..hw));
        Hit {
            pos: [x, y, z],
            det: [k * x, k * y],
            species: s,
        }
    };

    let mut rng = stage_rng(root, "background");
    for _ in 0..spec.background_ions {
        let h = background_hit(&mut rng);
        groups.push(Group {
            z: h.pos[2],
            hits: vec![h],
            pair: None,
        });
    }
    let mut rng = stage_rng(root, "triples");
    for _ in 0..spec.triples {
        let mut hits: Vec<Hit> = (0..3).map(|_| background_hit(&mut rng)).collect();
        let z = hits[0].pos[2];
        hits.iter_mut().for_each(|h| h.pos[2] = z);
        groups.push(Group {
            z: hits[0].pos[2],
            hits,
            pair: None,
        });
    }

    let mut plant = |rng: &mut ChaCha8Rng, species: usize, name: &str, sep: f64, z: f64| {
        let (x, y) = (rng.random_range(-hw..hw), rng.random_range(-hw..hw));
        let theta = rng.random_range(0.0..2.0 * PI);
        let det_sep = sep / spec.magnification;
        let da = [k * x, k * y];
        let db = [da[0] + det_sep * theta.cos(), da[1] + det_sep * theta.sin()];
        groups.push(Group {
            z,
            hits: vec![
                Hit {
                    pos: [x, y, z],
                    det: da,
                    species,
                },
                Hit {
                    pos: [db[0] / k, db[1] / k, z],
                    det: db,
                    species,
                },
            ],
            pair: Some((name.to_string(), sep)),
        });
    };
    for (i, p) in spec.pairs.iter().enumerate() {
        let mut rng = stage_rng(root, &format!("pairs/{i}"));
        let s = range_index(table, &p.species)?;
        for _ in 0..p.count {
            let z = if p.z[1] > p.z[0] { rng.random_range(p.z[0]..p.z[1]) } else { p.z[0] };
            let sep = sep_draw(&mut rng, p.median_sep_a, p.sigma_log);
            plant(&mut rng, s, &p.species, sep, z);
        }
    }
    for (i, m) in spec.mixtures.iter().enumerate() {
        let mut rng = stage_rng(root, &format!("mixtures/{i}"));
        let s = [range_index(table, &m.species[0])?, range_index(table, &m.species[1])?];
        for _ in 0..m.count {
            let z = rng.random_range(m.z[0]..m.z[1]);
            let which = usize::from(rng.random::<f64>() < m.fraction_at(z));
            let sep = sep_draw(&mut rng, m.median_sep_a[which], m.sigma_log);
            plant(&mut rng, s[which], &m.species[which], sep, z);
        }
    }

    // stable sort keeps generation order for equal depths
    groups.sort_by(|a, b| a.z.total_cmp(&b.z));
    let mut rng = stage_rng(root, "events");
    let zmax = layers.last().map(|l| l.z[1]).unwrap_or(100.0).max(1.0);
    let mut events = Vec::new();
    let mut truth = SpecimenTruth {
        seed: root,
        magnification: spec.magnification,
        range_names: table.ranges().iter().map(|r| r.name.clone()).collect(),
        event_species: Vec::new(),
        pairs: Vec::new(),
        triples: Vec::new(),
        mixtures: spec.mixtures.clone(),
    };
    for g in groups {
        let first = events.len();
        let mult = g.hits.len() as u32;
        for (j, h) in g.hits.iter().enumerate() {
            let r = &table.ranges()[h.species];
            let mz = mz_in(&mut rng, r);
            let v_dc = 4.0 + 6.0 * (h.pos[2] / zmax).clamp(0.0, 1.0);
            events.push(IonEvent {
                x: h.pos[0] as f32,
                y: h.pos[1] as f32,
                z: h.pos[2] as f32,
                mz: mz as f32,
                tof: (500.0 * (mz / v_dc).sqrt()) as f32,
                v_dc: v_dc as f32,
                det_x: h.det[0] as f32,
                det_y: h.det[1] as f32,
                pulse_delta: if j == 0 { rng.random_range(1..=5) } else { 0 },
                multiplicity: mult,
            });
            truth.event_species.push(h.species);
        }
        if let Some((species, sep)) = g.pair {
            truth.pairs.push(PlantedPair {
                index_a: first,
                index_b: first + 1,
                species,
                true_sep_a: sep,
                z: g.z,
            });
        } else if mult == 3 {
            truth.triples.push([first, first + 1, first + 2]);
        }
    }
    Ok((events, truth))
}

/// One family of lattice fringes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fringe {
    pub d_nm: f64,
    /// Wave-vector angle from +x (radians).
    pub angle: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn check_nyquist(fringes: &[Fringe], pixel_scale: f64) -> Result<()> {
    for f in fringes {
        if !(f.d_nm > 2.0 * pixel_scale) {
            return Err(Error::invalid(format!(
                "period {} nm is at or below the Nyquist limit of {} nm",
                f.d_nm,
                2.0 * pixel_scale
            )));
        }
    }
    Ok(())
}

fn fringe_value(fringes: &[Fringe], x_nm: f64, y_nm: f64) -> f64 {
    fringes
        .iter()
        .map(|f| f.amplitude * (2.0 * PI * (x_nm * f.angle.cos() + y_nm * f.angle.sin()) / f.d_nm + f.phase).cos())
        .sum()
}

/// Sum of oriented sinusoids plus white Gaussian noise of `noise_sigma`.
pub fn gen_lattice_image(
    fringes: &[Fringe],
    noise_sigma: f64,
    pixel_scale: f64,
    size: (usize, usize),
    seed: u64,
) -> Result<GrayImage> {
    if !(pixel_scale > 0.0) {
        return Err(Error::invalid("pixel scale must be positive"));
    }
    check_nyquist(fringes, pixel_scale)?;
    let mut rng = stage_rng(seed, "lattice");
    let noise = normal(noise_sigma);
    let (w, h) = size;
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 * pixel_scale, (i / w) as f64 * pixel_scale);
            fringe_value(fringes, x, y) + noise.sample(&mut rng)
        })
        .collect();
    GrayImage::new(w, h, pixel_scale, data)
}

/// Tiles sharing one set of periods; each tile gets its own random
/// orientation (shared by its periods) and phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePopulation {
    pub label: String,
    pub count: usize,
    /// (d nm, amplitude); the first entry is the dominant period.
    pub periods: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MosaicSpec {
    pub seed: u64,
    pub tile_px: usize,
    pub columns: usize,
    pub pixel_scale: f64,
    pub noise_sigma: f64,
    pub populations: Vec<TilePopulation>,
}

impl Default for MosaicSpec {
    fn default() -> Self {
        MosaicSpec {
            seed: 1,
            tile_px: 256,
            columns: 10,
            pixel_scale: 0.02,
            noise_sigma: 0.1,
            populations: vec![
                TilePopulation {
                    label: "delta".into(),
                    count: 40,
                    periods: vec![(0.159, 1.0)],
                },
                TilePopulation {
                    label: "epsilon".into(),
                    count: 30,
                    periods: vec![(0.144, 1.0)],
                },
                TilePopulation {
                    label: "mixed".into(),
                    count: 30,
                    periods: vec![(0.159, 1.0), (0.144, 0.7)],
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileTruth {
    pub id: usize,
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
    /// Population label, or `none` for padding tiles of pure noise.
    pub label: String,
    pub dominant_d_nm: Option<f64>,
    pub fringes: Vec<Fringe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicTruth {
    pub seed: u64,
    pub pixel_scale: f64,
    pub noise_sigma: f64,
    pub tiles: Vec<TileTruth>,
}

/// Grid of fringe tiles in shuffled order; read back with grid windows of
/// `tile_px`.
pub fn gen_fringe_mosaic(spec: &MosaicSpec) -> Result<(GrayImage, MosaicTruth)> {
    if spec.tile_px == 0 || spec.columns == 0 {
        return Err(Error::invalid("tile size and column count must be positive"));
    }
    let mut labels: Vec<usize> = Vec::new();
    for (i, p) in spec.populations.iter().enumerate() {
        let fr: Vec<Fringe> = p
            .periods
            .iter()
            .map(|&(d, a)| Fringe {
                d_nm: d,
                angle: 0.0,
                amplitude: a,
                phase: 0.0,
            })
            .collect();
        check_nyquist(&fr, spec.pixel_scale)?;
        labels.extend(std::iter::repeat_n(i, p.count));
    }
    if labels.is_empty() {
        return Err(Error::invalid("mosaic has no tiles"));
    }
    let mut rng = stage_rng(spec.seed, "mosaic/layout");
    labels.shuffle(&mut rng);
    let rows = labels.len().div_ceil(spec.columns);
    let (w, h) = (spec.columns * spec.tile_px, rows * spec.tile_px);
    let mut data = vec![0.0; w * h];
    let mut tiles = Vec::with_capacity(rows * spec.columns);
    let mut noise_rng = stage_rng(spec.seed, "mosaic/noise");
    let noise = normal(spec.noise_sigma);
    let t = spec.tile_px;
    for id in 0..rows * spec.columns {
        let (x0, y0) = ((id % spec.columns) * t, (id / spec.columns) * t);
        let (label, fringes) = match labels.get(id) {
            Some(&p) => {
                let angle = rng.random_range(0.0..PI);
                let fr: Vec<Fringe> = spec.populations[p]
                    .periods
                    .iter()
                    .map(|&(d, a)| Fringe {
                        d_nm: d,
                        angle,
                        amplitude: a,
                        phase: rng.random_range(0.0..2.0 * PI),
                    })
                    .collect();
                (spec.populations[p].label.clone(), fr)
            }
            None => ("none".to_string(), vec![]),
        };
        for y in 0..t {
            for x in 0..t {
                let v = fringe_value(&fringes, x as f64 * spec.pixel_scale, y as f64 * spec.pixel_scale);
                data[(y0 + y) * w + x0 + x] = v + noise.sample(&mut noise_rng);
            }
        }
        tiles.push(TileTruth {
            id,
            x0,
            y0,
            side: t,
            label,
            dominant_d_nm: fringes.first().map(|f| f.d_nm),
            fringes,
        });
    }
    Ok((
        GrayImage::new(w, h, spec.pixel_scale, data)?,
        MosaicTruth {
            seed: spec.seed,
            pixel_scale: spec.pixel_scale,
            noise_sigma: spec.noise_sigma,
            tiles,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IvSpec {
    pub seed: u64,
    pub gap_mv: f64,
    pub rn_mohm: f64,
    pub smear_mv: f64,
    pub leakage_mohm: f64,
    pub noise_pa: f64,
    /// Bias sweep runs from -v_max to v_max.
    pub v_max_mv: f64,
    pub step_mv: f64,
    /// Zero-bias supercurrent amplitude and its rounding width.
    pub ic_pa: f64,
    pub ic_width_mv: f64,
}

impl Default for IvSpec {
    fn default() -> Self {
        IvSpec {
            seed: 1,
            gap_mv: 4.5,
            rn_mohm: 9.0,
            smear_mv: 0.3,
            leakage_mohm: 1e4,
            noise_pa: 0.0,
            v_max_mv: 10.0,
            step_mv: 0.02,
            ic_pa: 0.0,
            ic_width_mv: 0.02,
        }
    }
}

/// Smoothed SIS characteristic:
/// `I = V/R_leak + (V/R_n - V/R_leak) * s(|V| - gap)` with `s` an erf step of
/// width `smear`, optionally plus `Ic * tanh(V / w)`, plus Gaussian noise.
/// Currents are in pA for bias in mV and resistances in MΩ.
pub fn gen_iv(spec: &IvSpec) -> Result<IvTrace> {
    if !(spec.gap_mv > 0.0 && spec.rn_mohm > 0.0 && spec.smear_mv > 0.0 && spec.leakage_mohm > 0.0) {
        return Err(Error::invalid("gap, Rn, smear and leakage must be positive"));
    }
    if !(spec.step_mv > 0.0 && spec.v_max_mv >= spec.step_mv && spec.ic_width_mv > 0.0) {
        return Err(Error::invalid("bias sweep needs 0 < step <= v_max"));
    }
    let n = (spec.v_max_mv / spec.step_mv).round() as i64;
    let mut rng = stage_rng(spec.seed, "iv");
    let noise = normal(spec.noise_pa);
    let f = |v: f64| {
        let s = 0.5 * (1.0 + statrs::function::erf::erf((v - spec.gap_mv) / spec.smear_mv));
        1000.0 * (v / spec.leakage_mohm + (v / spec.rn_mohm - v / spec.leakage_mohm) * s)
    };
    let mut bias = Vec::with_capacity(2 * n as usize + 1);
    let mut current = Vec::with_capacity(2 * n as usize + 1);
    for i in -n..=n {
        let v = i as f64 * spec.step_mv;
        let sgn = if i > 0 { 1.0 } else if i < 0 { -1.0 } else { 0.0 };
        let mut c = sgn * f(v.abs());
        if spec.ic_pa != 0.0 {
            c += spec.ic_pa * (v / spec.ic_width_mv).tanh();
        }
        if spec.noise_pa > 0.0 {
            c += noise.sample(&mut rng);
        }
        bias.push(v);
        current.push(c);
    }
    IvTrace::new(bias, current)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaSpec {
    pub seed: u64,
    pub ra_product: f64,
    pub areas_um2: Vec<f64>,
    pub noise_fraction: f64,
}

impl Default for RaSpec {
    fn default() -> Self {
        RaSpec {
            seed: 1,
            ra_product: 558.5,
            areas_um2: vec![1.8, 2.5, 4.0, 6.25, 9.0, 16.0, 25.0, 36.0, 49.0, 64.0],
            noise_fraction: 0.0,
        }
    }
}

/// `R_i = C / A_i * (1 + e_i)` with `e_i ~ N(0, noise_fraction)`.
pub fn gen_ra(spec: &RaSpec) -> Result<Vec<RaPoint>> {
    if !(spec.ra_product > 0.0) {
        return Err(Error::invalid("R·A product must be positive"));
    }
    if spec.areas_um2.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("areas must be positive"));
    }
    let mut rng = stage_rng(spec.seed, "ra");
    let noise = normal(spec.noise_fraction);
    Ok(spec
        .areas_um2
        .iter()
        .map(|&a| {
            let e = if spec.noise_fraction > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            RaPoint {
                area_um2: a,
                resistance_mohm: spec.ra_product / a * (1.0 + e),
            }
        })
        .collect())
}
