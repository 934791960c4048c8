use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::midranks;
use crate::error::{Error, Result};

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UTestResult {
    /// U statistic of the first sample: pairs (a, b) with a > b, ties counting one half.
    pub u: f64,
    /// Standardized score; negative when the first sample tends to be smaller.
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: UTestMethod,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// Small tie-free samples (combined size up to [`EXACT_MAX_N`]) get an exact
/// p-value from the permutation distribution of the rank sum. Everything
/// else uses the normal approximation with tie-corrected variance and a
/// continuity correction. `z` always comes from the normal approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann-Whitney U needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("Mann-Whitney U samples must be finite"));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;

    let tie_term = tie_correction(&pooled);
    let mean = (na * nb) as f64 / 2.0;
    let nf = n as f64;
    let var = if n > 1 {
        (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)))
    } else {
        0.0
    };
    let diff = u - mean;
    let (z, p_normal) = if var <= 0.0 || diff.abs() <= 0.5 {
        (0.0, 1.0)
    } else {
        let z = (diff - 0.5 * diff.signum()) / var.sqrt();
        let std = Normal::standard();
        (z, (2.0 * std.sf(z.abs())).min(1.0))
    };

    if n <= EXACT_MAX_N && tie_term == 0.0 {
        let p = exact_two_sided(na, nb, u.round() as i64);
        return Ok(UTestResult {
            u,
            z,
            p,
            method: UTestMethod::Exact,
            n_a: na,
            n_b: nb,
        });
    }
    Ok(UTestResult {
        u,
        z,
        p: p_normal,
        method: UTestMethod::NormalApproximation,
        n_a: na,
        n_b: nb,
    })
}

/// Sum of `t^3 - t` over tie groups.
fn tie_correction(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

/// Exact two-sided p-value: the share of all `C(na+nb, na)` rank
/// assignments whose U lies at least as far from `na*nb/2` as `u_obs`.
fn exact_two_sided(na: usize, nb: usize, u_obs: i64) -> f64 {
    let counts = u_distribution(na, nb);
    let mn = (na * nb) as i64;
    let obs_dev = (2 * u_obs - mn).abs();
    let mut extreme: u64 = 0;
    let mut total: u64 = 0;
    for (u, &c) in counts.iter().enumerate() {
        total += c;
        if (2 * u as i64 - mn).abs() >= obs_dev {
            extreme += c;
        }
    }
    (extreme as f64 / total as f64).min(1.0)
}

/// Number of size-`na` subsets of ranks `1..=na+nb` for each value of
/// `U = rank_sum - na(na+1)/2`.
fn u_distribution(na: usize, nb: usize) -> Vec<u64> {
    let n = na + nb;
    let max_sum = n * (n + 1) / 2;
    // ways[j][s]: subsets of size j with rank sum s among ranks seen so far
    let mut ways = vec![vec![0u64; max_sum + 1]; na + 1];
    ways[0][0] = 1;
    for rank in 1..=n {
        for j in (1..=na.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                ways[j][s] += ways[j - 1][s - rank];
            }
        }
    }
    let offset = na * (na + 1) / 2;
    (0..=na * nb).map(|u| ways[na][u + offset]).collect()
}
