use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composition::RatioMapOptions;
use crate::depth_phase::{Binning, DepthOrientation};
use crate::error::{Error, Result};
use crate::fringe::{ClusterOptions, WindowOptions};
use crate::pairs::Roi;
use crate::stats::Bandwidth;
use crate::synth::{IvSpec, MosaicSpec, RaSpec, SpecimenSpec};
use crate::transport::{IvConfig, RaFitMethod};

/// Everything a subcommand needs, read from one JSON file. Sections a
/// command does not use may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub pairs: PairsConfig,
    pub cluster: ClusterConfig,
    pub zseg: ZsegConfig,
    pub concmap: ConcmapConfig,
    pub fringe: FringeConfig,
    pub iv: IvSection,
    pub ra: RaSection,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub epos: Option<PathBuf>,
    pub ranges: Option<PathBuf>,
    /// `.png` (16-bit grayscale) or raw f32 with a `.json` sidecar.
    pub image: Option<PathBuf>,
    pub iv: Option<PathBuf>,
    pub ra: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleConfig {
    /// Fixed detector-to-specimen scale.
    Fixed { angstrom_per_mm: f64 },
    /// Scale chosen so that the homopairs of `tag` have the given median.
    Calibrate { tag: String, median_angstrom: f64 },
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig::Calibrate {
            tag: "R3".into(),
            median_angstrom: 2.77,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsConfig {
    pub scale: ScaleConfig,
    pub roi: Roi,
    pub delta_tag: String,
    pub epsilon_tag: String,
    pub pairs_from_higher: bool,
    pub kde_bandwidth: Bandwidth,
    pub kde_points: usize,
}

impl Default for PairsConfig {
    fn default() -> Self {
        PairsConfig {
            scale: ScaleConfig::default(),
            roi: Roi::everything(),
            delta_tag: "R3".into(),
            epsilon_tag: "R18".into(),
            pairs_from_higher: false,
            kde_bandwidth: Bandwidth::Auto,
            kde_points: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_components: usize,
    /// DBSCAN radius in PCA score space; defaults to the median distance to
    /// the 4th nearest neighbour.
    pub eps: Option<f64>,
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_components: 2,
            eps: None,
            min_pts: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZsegConfig {
    pub binning: Binning,
    pub orientation: DepthOrientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcmapConfig {
    pub voxel_size_nm: f64,
    pub ratio: RatioMapOptions,
    pub profile_bin_nm: f64,
    pub profile_origin_nm: f64,
}

impl Default for ConcmapConfig {
    fn default() -> Self {
        ConcmapConfig {
            voxel_size_nm: 1.0,
            ratio: RatioMapOptions::default(),
            profile_bin_nm: 1.0,
            profile_origin_nm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSelection {
    Random { count: usize },
    /// Non-overlapping tiling of the whole image.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FringeConfig {
    /// Required for PNG input; overrides the raw sidecar when set.
    pub pixel_scale_nm: Option<f64>,
    pub window_nm: f64,
    pub windows: WindowSelection,
    pub analysis: WindowOptions,
    pub k: usize,
    pub energy_percentile: f64,
    pub clip_nm: [f64; 2],
    pub n_init: usize,
    /// Reference d-spacings echoed into the summary.
    pub theory_d_nm: BTreeMap<String, f64>,
}

impl Default for FringeConfig {
    fn default() -> Self {
        let c = ClusterOptions::default();
        FringeConfig {
            pixel_scale_nm: None,
            window_nm: 4.5,
            windows: WindowSelection::Random { count: 100 },
            analysis: WindowOptions::default(),
            k: c.k,
            energy_percentile: c.energy_percentile,
            clip_nm: c.clip_nm,
            n_init: c.n_init,
            theory_d_nm: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvSection {
    pub area_um2: f64,
    pub analysis: IvConfig,
}

impl Default for IvSection {
    fn default() -> Self {
        IvSection {
            area_um2: 1.0,
            analysis: IvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaSection {
    pub method: RaFitMethod,
}

/// Datasets for `synth`; a `null` entry skips that dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub specimen: Option<SpecimenSpec>,
    pub mosaic: Option<MosaicSpec>,
    pub iv: Option<IvSpec>,
    pub ra: Option<RaSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            specimen: Some(SpecimenSpec::default()),
            mosaic: Some(MosaicSpec::default()),
            iv: Some(IvSpec::default()),
            ra: Some(RaSpec::default()),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.inputs.epos);
        fix(&mut self.inputs.ranges);
        fix(&mut self.inputs.image);
        fix(&mut self.inputs.iv);
        fix(&mut self.inputs.ra);
        fix(&mut self.output_dir);
    }

    /// Hex SHA-256 of the canonical serialization, ignoring the output
    /// directory. Take it before resolving paths so that moving a run
    /// directory keeps the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Fails on the first input path that does not name an existing file.
    pub fn check_inputs_exist(&self) -> Result<()> {
        let i = &self.inputs;
        for (what, p) in [("epos", &i.epos), ("ranges", &i.ranges), ("image", &i.image), ("iv", &i.iv), ("ra", &i.ra)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!("input `inputs.{what}` not found: {}", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("`{command}` is stochastic and needs a seed (config `seed` or --seed)")))
    }
}

pub(crate) fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing input path `inputs.{what}`")))
}
