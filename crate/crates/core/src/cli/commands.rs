use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::config::{require, RunConfig, ScaleConfig, WindowSelection};
use super::output::{input_record, FileRecord, Manifest, OutputDir};
use crate::apt::{assign_all, parse_range_file, read_epos, write_epos, IonEvent, RangeTable};
use crate::cluster::{dbscan, pca, suggest_eps};
use crate::composition::{depth_profile, ratio_map_2d, voxelize};
use crate::depth_phase::{phase_samples, trend_summary, z_segment};
use crate::error::Error;
use crate::fringe::{
    analyze_windows, cluster_windows, grid_windows, random_windows, read_png16, read_raw_f32, window_side_px,
    write_raw_f32, ClusterOptions, GrayImage,
};
use crate::pairs::{
    apply_roi, build_feature_matrix, calibrate_scale, count_mixed, extract_double_hits, filter_homopairs,
    measure_pairs, rescale, write_pairs_csv, DoubleHitOptions, DoubleHitPair, FEATURE_COLUMNS,
};
use crate::stats::{boxplot_stats, mann_whitney_u, Kde};
use crate::synth::{default_range_table, derive_seed, gen_apt_specimen, gen_fringe_mosaic, gen_iv, gen_ra};
use crate::transport::{analyze_iv, fit_ra, ra_to_csv, read_iv_csv, read_ra_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pairs,
    Cluster,
    Zseg,
    Concmap,
    Fringe,
    Iv,
    Ra,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pairs => "pairs",
            Command::Cluster => "cluster",
            Command::Zseg => "zseg",
            Command::Concmap => "concmap",
            Command::Fringe => "fringe",
            Command::Iv => "iv",
            Command::Ra => "ra",
            Command::Synth => "synth",
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    /// Process exit code: 2 for I/O and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.source.is_io_or_config() {
            2
        } else {
            1
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: &'static str) -> StageResult<T>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    base: &'a Path,
    out: OutputDir,
    inputs: Vec<FileRecord>,
}

impl Ctx<'_> {
    fn record_input(&mut self, path: &Path, stage: &'static str) -> StageResult<()> {
        let rec = input_record(path, self.base).at(stage)?;
        self.inputs.push(rec);
        Ok(())
    }
}

/// Runs one subcommand against an already resolved config and writes its
/// outputs plus `manifest.json` into `out_dir`.
pub fn execute(
    command: Command,
    cfg: &RunConfig,
    config_hash: &str,
    base: &Path,
    out_dir: &Path,
) -> StageResult<Manifest> {
    let out = OutputDir::create(out_dir).at("output")?;
    let mut ctx = Ctx {
        cfg,
        base,
        out,
        inputs: Vec::new(),
    };
    match command {
        Command::Pairs => cmd_pairs(&mut ctx)?,
        Command::Cluster => cmd_cluster(&mut ctx)?,
        Command::Zseg => cmd_zseg(&mut ctx)?,
        Command::Concmap => cmd_concmap(&mut ctx)?,
        Command::Fringe => cmd_fringe(&mut ctx)?,
        Command::Iv => cmd_iv(&mut ctx)?,
        Command::Ra => cmd_ra(&mut ctx)?,
        Command::Synth => cmd_synth(&mut ctx)?,
    }
    let Ctx { out, inputs, .. } = ctx;
    out.finish(command.name(), config_hash, cfg.seed, inputs).at("manifest")
}

struct Apt {
    events: Vec<IonEvent>,
    table: RangeTable,
    species: Vec<Option<usize>>,
}

fn load_apt(ctx: &mut Ctx) -> StageResult<Apt> {
    let epos = require(&ctx.cfg.inputs.epos, "epos").at("config")?.to_path_buf();
    let ranges = require(&ctx.cfg.inputs.ranges, "ranges").at("config")?.to_path_buf();
    ctx.record_input(&epos, "epos")?;
    ctx.record_input(&ranges, "ranges")?;
    let events = read_epos(&epos).at("epos")?;
    let text = fs::read_to_string(&ranges).map_err(|e| Error::io(&ranges, e)).at("ranges")?;
    let table = parse_range_file(&text).at("ranges")?;
    let species = assign_all(&events, &table);
    log::info!("read {} events, {} ranged", events.len(), species.iter().flatten().count());
    Ok(Apt { events, table, species })
}

struct PairSet {
    all: Vec<DoubleHitPair>,
    delta: Vec<DoubleHitPair>,
    epsilon: Vec<DoubleHitPair>,
    scale: f64,
    counts: serde_json::Value,
}

fn check_tag(table: &RangeTable, tag: &str, what: &str) -> crate::Result<()> {
    if table.index_of_tag(tag).is_none() {
        return Err(Error::Config(format!("{what} tag `{tag}` is not defined in the range table")));
    }
    Ok(())
}

fn pair_stage(cfg: &RunConfig, apt: &Apt) -> StageResult<PairSet> {
    let pc = &cfg.pairs;
    pc.roi.validate().at("roi")?;
    check_tag(&apt.table, &pc.delta_tag, "delta").at("config")?;
    check_tag(&apt.table, &pc.epsilon_tag, "epsilon").at("config")?;
    let ex = extract_double_hits(
        &apt.events,
        DoubleHitOptions {
            pairs_from_higher: pc.pairs_from_higher,
        },
    );
    let kept = apply_roi(&ex.pairs, &apt.events, &pc.roi);
    let mut all = measure_pairs(&kept, &apt.events, &apt.species, 1.0);
    let scale = match &pc.scale {
        ScaleConfig::Fixed { angstrom_per_mm } => {
            if !(*angstrom_per_mm > 0.0 && angstrom_per_mm.is_finite()) {
                return Err(Error::Config(format!("fixed scale must be positive, got {angstrom_per_mm}"))).at("config");
            }
            *angstrom_per_mm
        }
        ScaleConfig::Calibrate { tag, median_angstrom } => {
            check_tag(&apt.table, tag, "calibration").at("config")?;
            let reference = filter_homopairs(&all, &apt.table, tag);
            calibrate_scale(&reference, *median_angstrom).at("calibration")?
        }
    };
    rescale(&mut all, scale);
    let delta = filter_homopairs(&all, &apt.table, &pc.delta_tag);
    let epsilon = filter_homopairs(&all, &apt.table, &pc.epsilon_tag);
    let counts = json!({
        "single_groups": ex.single_groups,
        "double_groups": ex.double_groups,
        "higher_order_groups": ex.higher_order_groups,
        "inconsistent_groups": ex.inconsistent_groups,
        "pairs_extracted": ex.pairs.len(),
        "pairs_in_roi": kept.len(),
        "delta": delta.len(),
        "epsilon": epsilon.len(),
        "mixed": count_mixed(&all, &apt.table, &pc.delta_tag, &pc.epsilon_tag),
    });
    log::info!("{} pairs in ROI, {} delta, {} epsilon", kept.len(), delta.len(), epsilon.len());
    Ok(PairSet {
        all,
        delta,
        epsilon,
        scale,
        counts,
    })
}

fn seps(pairs: &[DoubleHitPair]) -> Vec<f64> {
    pairs.iter().map(|p| p.real_sep).collect()
}

fn cmd_pairs(ctx: &mut Ctx) -> StageResult<()> {
    let apt = load_apt(ctx)?;
    let ps = pair_stage(ctx.cfg, &apt)?;
    let (d, e) = (seps(&ps.delta), seps(&ps.epsilon));

    let utest = mann_whitney_u(&e, &d).at("utest")?;
    let box_of = |v: &[f64]| (!v.is_empty()).then(|| boxplot_stats(v));
    let boxes = json!({ "delta": box_of(&d), "epsilon": box_of(&e) });

    let mut kde = String::from("population,x_A,density\n");
    for (name, v) in [("delta", &d), ("epsilon", &e)] {
        let k = Kde::new(v, ctx.cfg.pairs.kde_bandwidth).at("kde")?;
        let g = k.grid(ctx.cfg.pairs.kde_points, 3.0);
        for (x, y) in g.x.iter().zip(&g.density) {
            kde.push_str(&format!("{name},{x},{y}\n"));
        }
    }

    let out = &mut ctx.out;
    out.write_with("pairs.csv", |b| write_pairs_csv(b, &ps.all, &apt.table))
        .at("write")?;
    out.write_json("boxplots.json", &boxes).at("write")?;
    out.write_json(
        "utest.json",
        &json!({ "sample_a": "epsilon", "sample_b": "delta", "result": utest }),
    )
    .at("write")?;
    out.write("kde.csv", kde.as_bytes()).at("write")?;
    out.write_json(
        "summary.json",
        &json!({ "scale_angstrom_per_mm": ps.scale, "counts": ps.counts }),
    )
    .at("write")?;
    Ok(())
}

fn cmd_cluster(ctx: &mut Ctx) -> StageResult<()> {
    let apt = load_apt(ctx)?;
    let ps = pair_stage(ctx.cfg, &apt)?;
    let cc = &ctx.cfg.cluster;
    let fm = build_feature_matrix(&ps.delta, &ps.epsilon).at("features")?;
    let p = pca(&fm.as_vecs(), cc.n_components).at("pca")?;
    let eps = match cc.eps {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::Config(format!("DBSCAN eps must be positive, got {e}"))).at("config"),
        None => suggest_eps(&p.scores, 4)
            .ok_or_else(|| Error::Analysis("too few points to choose a DBSCAN radius".into()))
            .at("dbscan")?,
    };
    if cc.min_pts == 0 {
        return Err(Error::Config("DBSCAN min_pts must be at least 1".into())).at("config");
    }
    let labels = dbscan(&p.scores, eps, cc.min_pts);

    let mut features = FEATURE_COLUMNS.join(",");
    features.push('\n');
    for r in fm.raw_rows() {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        features.push_str(&cells.join(","));
        features.push('\n');
    }
    let mut scores = (0..p.components.len())
        .map(|i| format!("pc{}", i + 1))
        .collect::<Vec<_>>()
        .join(",");
    scores.push('\n');
    for s in &p.scores {
        let cells: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        scores.push_str(&cells.join(","));
        scores.push('\n');
    }
    let clusters: Vec<_> = labels
        .members()
        .iter()
        .enumerate()
        .map(|(c, m)| {
            let eps_members = m.iter().filter(|&&i| fm.rows[i][1] == 1.0).count();
            json!({ "cluster": c, "size": m.len(), "epsilon_members": eps_members })
        })
        .collect();

    let out = &mut ctx.out;
    out.write("features.csv", features.as_bytes()).at("write")?;
    out.write_json(
        "pca.json",
        &json!({
            "columns": FEATURE_COLUMNS,
            "feature_means": fm.means,
            "feature_stds": fm.stds,
            "pca": p,
            "explained_variance_ratio": p.explained_variance_ratio(),
        }),
    )
    .at("write")?;
    out.write("scores.csv", scores.as_bytes()).at("write")?;
    out.write_with("dbscan_labels.csv", |b| labels.write_csv(b)).at("write")?;
    out.write_json(
        "cluster_summary.json",
        &json!({
            "eps": eps,
            "eps_suggested": cc.eps.is_none(),
            "min_pts": cc.min_pts,
            "n_clusters": labels.n_clusters(),
            "noise": labels.noise_count(),
            "clusters": clusters,
        }),
    )
    .at("write")?;
    Ok(())
}

fn cmd_zseg(ctx: &mut Ctx) -> StageResult<()> {
    let apt = load_apt(ctx)?;
    let ps = pair_stage(ctx.cfg, &apt)?;
    let zc = &ctx.cfg.zseg;
    let samples = phase_samples(&ps.delta, &ps.epsilon);
    let bins = z_segment(&samples, &zc.binning, zc.orientation).at("zseg")?;
    let trend = trend_summary(&bins).at("trend")?;
    ctx.out.write_with("zseg.csv", |b| bins.write_csv(b)).at("write")?;
    ctx.out
        .write_json(
            "trend.json",
            &json!({ "trend": trend, "orientation": bins.orientation, "outside_edges": bins.outside }),
        )
        .at("write")?;
    Ok(())
}

fn cmd_concmap(ctx: &mut Ctx) -> StageResult<()> {
    let apt = load_apt(ctx)?;
    let cc = &ctx.cfg.concmap;
    let grid = voxelize(&apt.events, &apt.species, &apt.table, cc.voxel_size_nm, None).at("voxelize")?;
    let map = ratio_map_2d(&grid, &apt.table, &cc.ratio).at("ratio_map")?;
    let profile = depth_profile(
        &apt.events,
        &apt.species,
        &apt.table,
        cc.profile_bin_nm,
        cc.profile_origin_nm,
    )
    .at("depth_profile")?;
    let unmasked: Vec<f64> = map.unmasked().collect();
    let total_num: f64 = map.numerator.iter().sum();
    let total_den: f64 = map.denominator.iter().sum();
    let mut header = map.header_json();
    header["numerator"] = json!(cc.ratio.numerator);
    header["denominator"] = json!(cc.ratio.denominator);
    header["mask_threshold"] = json!(cc.ratio.mask_threshold);
    header["unmasked_cells"] = json!(unmasked.len());
    header["unmasked_median"] = json!((!unmasked.is_empty()).then(|| crate::stats::median(&unmasked)));
    header["bulk_ratio"] = json!((total_den > 0.0).then(|| total_num / total_den));

    let out = &mut ctx.out;
    out.write_with("voxels.csv", |b| grid.write_csv(b, &apt.table)).at("write")?;
    out.write_with("ratio_map.csv", |b| map.write_csv(b)).at("write")?;
    out.write_json("ratio_map.json", &header).at("write")?;
    out.write_with("depth_profile.csv", |b| profile.write_csv(b)).at("write")?;
    Ok(())
}

fn load_image(ctx: &mut Ctx) -> StageResult<GrayImage> {
    let path = require(&ctx.cfg.inputs.image, "image").at("config")?.to_path_buf();
    ctx.record_input(&path, "image")?;
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let scale = ctx.cfg.fringe.pixel_scale_nm;
    if let Some(s) = scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("pixel scale must be positive, got {s}"))).at("config");
        }
    }
    if is_png {
        let s = scale
            .ok_or_else(|| Error::Config("PNG input needs `fringe.pixel_scale_nm`".into()))
            .at("config")?;
        read_png16(&path, s).at("image")
    } else {
        ctx.record_input(&crate::fringe::sidecar_path(&path), "image")?;
        let mut img = read_raw_f32(&path).at("image")?;
        if let Some(s) = scale {
            img.pixel_scale = s;
        }
        Ok(img)
    }
}

fn cmd_fringe(ctx: &mut Ctx) -> StageResult<()> {
    let seed = ctx.cfg.require_seed("fringe").at("config")?;
    let img = load_image(ctx)?;
    let fc = &ctx.cfg.fringe;
    if !(fc.window_nm > 0.0) {
        return Err(Error::Config(format!("window size must be positive, got {}", fc.window_nm))).at("config");
    }
    let side = window_side_px(fc.window_nm, img.pixel_scale);
    let windows = match fc.windows {
        WindowSelection::Random { count } => {
            random_windows(&img, side, count, derive_seed(seed, "fringe/windows")).at("windows")?
        }
        WindowSelection::Grid => grid_windows(&img, side),
    };
    let (samples, no_fringe) = analyze_windows(&img, &windows, &fc.analysis).at("windows")?;
    log::info!("{} windows, {} without fringes", windows.len(), no_fringe.len());
    let opts = ClusterOptions {
        k: fc.k,
        energy_percentile: fc.energy_percentile,
        clip_nm: fc.clip_nm,
        seed: derive_seed(seed, "fringe/kmeans"),
        n_init: fc.n_init,
    };
    let clustering = cluster_windows(&samples, &opts).at("cluster")?;

    let out = &mut ctx.out;
    out.write_with("windows.csv", |b| clustering.write_csv(&no_fringe, b))
        .at("write")?;
    out.write_json(
        "fringe_summary.json",
        &json!({
            "pixel_scale_nm": img.pixel_scale,
            "window_side_px": side,
            "windows": windows.len(),
            "no_fringe": no_fringe.len(),
            "energy_threshold": clustering.energy_threshold,
            "inertia": clustering.inertia,
            "clusters": clustering.clusters,
            "theory_d_nm": fc.theory_d_nm,
        }),
    )
    .at("write")?;
    Ok(())
}

fn cmd_iv(ctx: &mut Ctx) -> StageResult<()> {
    let path = require(&ctx.cfg.inputs.iv, "iv").at("config")?.to_path_buf();
    ctx.record_input(&path, "iv_input")?;
    let trace = read_iv_csv(&path).at("iv_input")?;
    let s = analyze_iv(&trace, ctx.cfg.iv.area_um2, &ctx.cfg.iv.analysis).at("iv")?;
    ctx.out
        .write_json(
            "iv_summary.json",
            &json!({ "area_um2": ctx.cfg.iv.area_um2, "points": trace.len(), "summary": s }),
        )
        .at("write")?;
    Ok(())
}

fn cmd_ra(ctx: &mut Ctx) -> StageResult<()> {
    let path = require(&ctx.cfg.inputs.ra, "ra").at("config")?.to_path_buf();
    ctx.record_input(&path, "ra_input")?;
    let points = read_ra_csv(&path).at("ra_input")?;
    let fit = fit_ra(&points, ctx.cfg.ra.method).at("ra")?;
    ctx.out.write_json("ra_fit.json", &fit).at("write")?;
    Ok(())
}

fn cmd_synth(ctx: &mut Ctx) -> StageResult<()> {
    let seed = ctx.cfg.require_seed("synth").at("config")?;
    let sc = &ctx.cfg.synth;
    let out = &mut ctx.out;
    if let Some(spec) = &sc.specimen {
        let mut spec = spec.clone();
        spec.seed = seed;
        let table = default_range_table();
        let (events, truth) = gen_apt_specimen(&spec, &table).at("synth/specimen")?;
        out.write_with("specimen.epos", |b| write_epos(b, &events)).at("write")?;
        out.write("ranges.rrng", table.to_rrng().as_bytes()).at("write")?;
        out.write_json("specimen_truth.json", &truth).at("write")?;
    }
    if let Some(spec) = &sc.mosaic {
        let mut spec = spec.clone();
        spec.seed = seed;
        let (img, truth) = gen_fringe_mosaic(&spec).at("synth/mosaic")?;
        let (bytes, meta) = write_raw_f32(&img);
        out.write("mosaic.raw", &bytes).at("write")?;
        out.write("mosaic.json", meta.as_bytes()).at("write")?;
        out.write_json("mosaic_truth.json", &truth).at("write")?;
    }
    if let Some(spec) = &sc.iv {
        let mut spec = *spec;
        spec.seed = seed;
        let trace = gen_iv(&spec).at("synth/iv")?;
        out.write("iv.csv", trace.to_csv().as_bytes()).at("write")?;
    }
    if let Some(spec) = &sc.ra {
        let mut spec = spec.clone();
        spec.seed = seed;
        let pts = gen_ra(&spec).at("synth/ra")?;
        out.write("ra.csv", ra_to_csv(&pts).as_bytes()).at("write")?;
    }
    Ok(())
}
