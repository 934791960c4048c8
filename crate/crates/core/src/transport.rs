//! Junction transport: resistance-area fits and I-V characterization.
//!
//! Units: bias in mV, current in pA, resistance in MΩ, area in μm².
//! A slope of 1 pA/mV is a conductance of 1e-9 S, i.e. 1000 MΩ.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MOHM_PER_MV_PER_PA: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvTrace {
    bias_mv: Vec<f64>,
    current_pa: Vec<f64>,
}

impl IvTrace {
    pub fn new(bias_mv: Vec<f64>, current_pa: Vec<f64>) -> Result<Self> {
        if bias_mv.len() != current_pa.len() {
            return Err(Error::invalid("bias and current columns differ in length"));
        }
        if bias_mv.iter().chain(&current_pa).any(|v| !v.is_finite()) {
            return Err(Error::invalid("I-V trace has non-finite values"));
        }
        if let Some(i) = bias_mv.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "bias must be strictly increasing (violated at row {})",
                i + 1
            )));
        }
        Ok(IvTrace { bias_mv, current_pa })
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias_mv
    }

    pub fn current(&self) -> &[f64] {
        &self.current_pa
    }

    pub fn len(&self) -> usize {
        self.bias_mv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias_mv.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bias_mV,current_pA\n");
        for (v, i) in self.bias_mv.iter().zip(&self.current_pa) {
            s.push_str(&format!("{v},{i}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaPoint {
    pub area_um2: f64,
    pub resistance_mohm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaFitMethod {
    /// Unweighted least squares of R against 1/A through the origin.
    #[default]
    Linear,
    /// Mean of ln(R·A); the error is propagated to the linear scale.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaFit {
    /// R·A product (MΩ·μm²).
    pub ra_product: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: RaFitMethod,
}

pub fn validate_ra(points: &[RaPoint]) -> Result<()> {
    for p in points {
        if !(p.area_um2 > 0.0 && p.area_um2.is_finite()) {
            return Err(Error::invalid(format!("junction area must be positive, got {}", p.area_um2)));
        }
        if !(p.resistance_mohm > 0.0 && p.resistance_mohm.is_finite()) {
            return Err(Error::invalid(format!(
                "junction resistance must be positive, got {}",
                p.resistance_mohm
            )));
        }
    }
    Ok(())
}

/// Fits `R = C / A`.
pub fn fit_ra(points: &[RaPoint], method: RaFitMethod) -> Result<RaFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("R·A fit needs at least 2 points, got {}", points.len())));
    }
    validate_ra(points)?;
    let n = points.len();
    let (c, stderr) = match method {
        RaFitMethod::Linear => {
            let sxx: f64 = points.iter().map(|p| 1.0 / (p.area_um2 * p.area_um2)).sum();
            let sxy: f64 = points.iter().map(|p| p.resistance_mohm / p.area_um2).sum();
            let c = sxy / sxx;
            let rss: f64 = points
                .iter()
                .map(|p| {
                    let r = p.resistance_mohm - c / p.area_um2;
                    r * r
                })
                .sum();
            (c, (rss / (n - 1) as f64 / sxx).sqrt())
        }
        RaFitMethod::Log => {
            let logs: Vec<f64> = points.iter().map(|p| (p.resistance_mohm * p.area_um2).ln()).collect();
            let m = crate::stats::mean(&logs);
            let sd = crate::stats::std_dev(&logs);
            let c = m.exp();
            (c, c * sd / (n as f64).sqrt())
        }
    };
    Ok(RaFit {
        ra_product: c,
        stderr,
        n,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IvConfig {
    /// Normal-state fit uses |V| at or above this bias (mV).
    pub high_bias_mv: f64,
    /// Subgap fit uses |V| at or below this bias (mV).
    pub subgap_mv: f64,
    /// Points in the local quadratic used for dI/dV.
    pub derivative_window: usize,
    /// Minimum noise floor (pA), the instrument resolution.
    pub min_noise_floor_pa: f64,
    /// Supercurrent is reported when the zero-bias step exceeds this many noise floors.
    pub detection_factor: f64,
    /// A conductance peak below this multiple of the normal conductance is not a gap.
    pub gap_peak_ratio: f64,
}

impl Default for IvConfig {
    fn default() -> Self {
        IvConfig {
            high_bias_mv: 6.0,
            subgap_mv: 1.0,
            derivative_window: 7,
            min_noise_floor_pa: 1.0,
            detection_factor: 5.0,
            gap_peak_ratio: 1.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvSummary {
    /// Bias of the conductance maximum on the positive branch (mV).
    pub gap_voltage_mv: Option<f64>,
    /// Same on the negative branch, as a magnitude.
    pub gap_voltage_negative_mv: Option<f64>,
    /// Bias span where the quasiparticle step rises from 5% to 95%.
    pub onset_range_mv: Option<(f64, f64)>,
    pub rn_mohm: f64,
    /// `None` when the subgap conductance is not positive.
    pub subgap_r_mohm: Option<f64>,
    pub zero_bias_step_pa: f64,
    pub noise_floor_pa: f64,
    pub supercurrent_detected: bool,
    /// Critical current density (pA/μm²); an upper bound when no supercurrent is seen.
    pub jc_pa_per_um2: f64,
    pub jc_is_upper_bound: bool,
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn lstsq(design: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = design.len();
    let cols = design[0].len();
    let a = DMatrix::from_fn(rows, cols, |i, j| design[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::analysis(format!("least squares failed: {e}")))?;
    let resid = &b - &a * &x;
    let dof = rows.saturating_sub(cols).max(1);
    let rms = (resid.norm_squared() / dof as f64).sqrt();
    Ok((x.iter().copied().collect(), rms))
}

/// dI/dV from a local quadratic fit centred on every interior point.
fn smoothed_conductance(v: &[f64], i: &[f64], window: usize) -> Vec<Option<f64>> {
    let half = window / 2;
    (0..v.len())
        .map(|k| {
            if k < half || k + half >= v.len() {
                return None;
            }
            let design: Vec<Vec<f64>> = (k - half..=k + half)
                .map(|j| {
                    let dv = v[j] - v[k];
                    vec![1.0, dv, dv * dv]
                })
                .collect();
            lstsq(&design, &i[k - half..=k + half]).ok().map(|(c, _)| c[1])
        })
        .collect()
}

fn refine_peak(v: &[f64], g: &[Option<f64>], k: usize) -> f64 {
    match (k.checked_sub(1).and_then(|j| g[j]), g.get(k + 1).copied().flatten(), g[k]) {
        (Some(a), Some(c), Some(b)) => {
            let denom = a - 2.0 * b + c;
            let h = 0.5 * (v[k + 1] - v[k - 1]);
            if denom < 0.0 && (v[k + 1] - v[k] - (v[k] - v[k - 1])).abs() < 1e-9 * h.abs().max(1.0) {
                v[k] + (0.5 * (a - c) / denom) * h
            } else {
                v[k]
            }
        }
        _ => v[k],
    }
}

pub fn analyze_iv(trace: &IvTrace, area_um2: f64, cfg: &IvConfig) -> Result<IvSummary> {
    if !(area_um2 > 0.0) {
        return Err(Error::invalid(format!("junction area must be positive, got {area_um2}")));
    }
    if cfg.derivative_window < 3 || cfg.derivative_window.is_multiple_of(2) {
        return Err(Error::invalid("derivative window must be odd and at least 3"));
    }
    let v = trace.bias();
    let i = trace.current();

    // normal-state branch
    let high: Vec<usize> = (0..v.len()).filter(|&k| v[k].abs() >= cfg.high_bias_mv).collect();
    let n_pos = high.iter().filter(|&&k| v[k] > 0.0).count();
    if n_pos < 2 || high.len() - n_pos < 2 {
        return Err(Error::analysis(format!(
            "sweep does not extend past ±{} mV on both branches",
            cfg.high_bias_mv
        )));
    }
    let design: Vec<Vec<f64>> = high.iter().map(|&k| vec![v[k], 1.0]).collect();
    let y: Vec<f64> = high.iter().map(|&k| i[k]).collect();
    let (coef, _) = lstsq(&design, &y)?;
    let g_normal = coef[0];
    if !(g_normal > 0.0) {
        return Err(Error::analysis("normal-state conductance is not positive"));
    }
    let rn = MOHM_PER_MV_PER_PA / g_normal;

    // subgap band: slope, zero-bias step and offset
    let sub: Vec<usize> = (0..v.len()).filter(|&k| v[k].abs() <= cfg.subgap_mv).collect();
    let sub_pos = sub.iter().filter(|&&k| v[k] > 0.0).count();
    let sub_neg = sub.iter().filter(|&&k| v[k] < 0.0).count();
    if sub_pos < 2 || sub_neg < 2 {
        return Err(Error::analysis(format!(
            "subgap band ±{} mV needs at least two points on each side of zero",
            cfg.subgap_mv
        )));
    }
    let design: Vec<Vec<f64>> = sub.iter().map(|&k| vec![v[k], sign0(v[k]), 1.0]).collect();
    let y: Vec<f64> = sub.iter().map(|&k| i[k]).collect();
    let (coef, rms) = lstsq(&design, &y)?;
    let g_sub = coef[0];
    let step = coef[1];
    let subgap_r = (g_sub > 0.0).then(|| MOHM_PER_MV_PER_PA / g_sub);
    let noise_floor = rms.max(cfg.min_noise_floor_pa);
    let detected = step.abs() > cfg.detection_factor * noise_floor;
    let (jc, bound) = if detected {
        (step.abs() / area_um2, false)
    } else {
        (cfg.detection_factor * noise_floor / area_um2, true)
    };

    // gap from the smoothed conductance peak
    let g = smoothed_conductance(v, i, cfg.derivative_window);
    let peak = |pred: &dyn Fn(f64) -> bool| -> Option<usize> {
        (0..v.len())
            .filter(|&k| pred(v[k]) && v[k].abs() > cfg.subgap_mv)
            .filter_map(|k| g[k].map(|x| (k, x)))
            .fold(None, |best: Option<(usize, f64)>, (k, x)| match best {
                Some((_, bx)) if bx >= x => best,
                _ => Some((k, x)),
            })
            .filter(|&(_, x)| x >= cfg.gap_peak_ratio * g_normal)
            .map(|(k, _)| k)
    };
    let pos_peak = peak(&|x| x > 0.0);
    let neg_peak = peak(&|x| x < 0.0);
    let gap = pos_peak.map(|k| refine_peak(v, &g, k));
    let gap_neg = neg_peak.map(|k| refine_peak(v, &g, k).abs());

    let onset = pos_peak.and_then(|k| onset_span(v, i, k, g_sub, g_normal));

    Ok(IvSummary {
        gap_voltage_mv: gap,
        gap_voltage_negative_mv: gap_neg,
        onset_range_mv: onset,
        rn_mohm: rn,
        subgap_r_mohm: subgap_r,
        zero_bias_step_pa: step,
        noise_floor_pa: noise_floor,
        supercurrent_detected: detected,
        jc_pa_per_um2: jc,
        jc_is_upper_bound: bound,
    })
}

/// 5%..95% span of the normalized step `(I - g_sub V) / ((g_n - g_sub) V)`,
/// walking outwards from the conductance peak at index `k`.
fn onset_span(v: &[f64], i: &[f64], k: usize, g_sub: f64, g_n: f64) -> Option<(f64, f64)> {
    let dg = g_n - g_sub;
    if !(dg > 0.0) {
        return None;
    }
    let f = |j: usize| (i[j] - g_sub * v[j]) / (dg * v[j]);
    let cross = |a: usize, b: usize, level: f64| {
        let (fa, fb) = (f(a), f(b));
        if fb == fa {
            v[a]
        } else {
            v[a] + (level - fa) * (v[b] - v[a]) / (fb - fa)
        }
    };
    let mut lo = None;
    let mut j = k;
    while j > 0 && v[j - 1] > 0.0 {
        if f(j - 1) <= 0.05 {
            lo = Some(cross(j - 1, j, 0.05));
            break;
        }
        j -= 1;
    }
    let mut hi = None;
    let mut j = k;
    while j + 1 < v.len() {
        if f(j + 1) >= 0.95 {
            hi = Some(if f(j) >= 0.95 { v[j] } else { cross(j, j + 1, 0.95) });
            break;
        }
        j += 1;
    }
    Some((lo?, hi?))
}

fn read_two_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::Config(format!("{}: line {} needs two columns", path.display(), n + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => rows.push((x, y)),
            // header row
            _ if rows.is_empty() && n == 0 => continue,
            _ => {
                return Err(Error::Config(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    n + 1
                )))
            }
        }
    }
    Ok(rows)
}

/// Reads `bias_mV,current_pA` CSV.
pub fn read_iv_csv(path: impl AsRef<Path>) -> Result<IvTrace> {
    let (v, i) = read_two_columns(path.as_ref())?.into_iter().unzip();
    IvTrace::new(v, i)
}

/// Reads `area_um2,resistance_MOhm` CSV.
pub fn read_ra_csv(path: impl AsRef<Path>) -> Result<Vec<RaPoint>> {
    let pts: Vec<RaPoint> = read_two_columns(path.as_ref())?
        .into_iter()
        .map(|(a, r)| RaPoint {
            area_um2: a,
            resistance_mohm: r,
        })
        .collect();
    validate_ra(&pts)?;
    Ok(pts)
}

pub fn ra_to_csv(points: &[RaPoint]) -> String {
    let mut s = String::from("area_um2,resistance_MOhm\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p.area_um2, p.resistance_mohm));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ra(points: &[(f64, f64)]) -> Vec<RaPoint> {
        points
            .iter()
            .map(|&(a, r)| RaPoint {
                area_um2: a,
                resistance_mohm: r,
            })
            .collect()
    }

    #[test]
    fn exact_hyperbola() {
        let f = fit_ra(&ra(&[(1.0, 10.0), (2.0, 5.0)]), RaFitMethod::Linear).unwrap();
        assert!((f.ra_product - 10.0).abs() < 1e-12);
        assert!(f.stderr.abs() < 1e-12);
        let f = fit_ra(&ra(&[(1.0, 10.0), (2.0, 5.0)]), RaFitMethod::Log).unwrap();
        assert!((f.ra_product - 10.0).abs() < 1e-12);
    }

    #[test]
    fn equal_areas_reduce_to_mean() {
        let f = fit_ra(&ra(&[(4.0, 10.0), (4.0, 12.0), (4.0, 14.0)]), RaFitMethod::Linear).unwrap();
        assert!((f.ra_product - 48.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_ra(&ra(&[(1.0, 1.0)]), RaFitMethod::Linear).is_err());
        assert!(fit_ra(&ra(&[(1.0, 1.0), (0.0, 2.0)]), RaFitMethod::Linear).is_err());
    }

    #[test]
    fn scale_covariance() {
        let pts = ra(&[(1.8, 300.0), (4.0, 140.0), (16.0, 36.0), (64.0, 8.5)]);
        let scaled: Vec<_> = pts
            .iter()
            .map(|p| RaPoint {
                resistance_mohm: p.resistance_mohm * 3.0,
                ..*p
            })
            .collect();
        let a = fit_ra(&pts, RaFitMethod::Linear).unwrap();
        let b = fit_ra(&scaled, RaFitMethod::Linear).unwrap();
        assert!((b.ra_product - 3.0 * a.ra_product).abs() < 1e-9 * b.ra_product);
        assert!((b.stderr - 3.0 * a.stderr).abs() < 1e-9 * b.stderr.max(1.0));
    }

    fn ohmic(r_mohm: f64) -> IvTrace {
        let v: Vec<f64> = (-500..=500).map(|k| k as f64 * 0.02).collect();
        let i = v.iter().map(|x| x * MOHM_PER_MV_PER_PA / r_mohm).collect();
        IvTrace::new(v, i).unwrap()
    }

    #[test]
    fn ohmic_device() {
        let s = analyze_iv(&ohmic(9.0), 64.0, &IvConfig::default()).unwrap();
        assert!((s.rn_mohm - 9.0).abs() < 1e-9);
        assert!((s.subgap_r_mohm.unwrap() - 9.0).abs() < 1e-9);
        assert_eq!(s.gap_voltage_mv, None);
        assert_eq!(s.onset_range_mv, None);
        assert!(!s.supercurrent_detected);
        assert!(s.jc_is_upper_bound);
    }

    #[test]
    fn non_monotonic_bias_rejected() {
        assert!(IvTrace::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(IvTrace::new(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn narrow_sweep_rejected() {
        let v: Vec<f64> = (-100..=100).map(|k| k as f64 * 0.02).collect();
        let i = v.clone();
        let t = IvTrace::new(v, i).unwrap();
        assert!(analyze_iv(&t, 1.0, &IvConfig::default()).is_err());
    }
}
