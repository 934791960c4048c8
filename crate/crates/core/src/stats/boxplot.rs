use serde::Serialize;

use super::{quantile_sorted, sorted_copy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Tukey box summary. Quartiles interpolate linearly between order
/// statistics; whiskers reach the most extreme data inside the 1.5 IQR
/// fences and everything beyond is an outlier (sorted ascending).
///
/// Panics on an empty sample.
pub fn boxplot_stats(samples: &[f64]) -> BoxStats {
    let sorted = sorted_copy(samples);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside = || sorted.iter().copied().filter(|&v| v >= lo_fence && v <= hi_fence);
    // the quartiles always lie inside the fences, so `inside` is non-empty
    let whisker_low = inside().next().unwrap_or(q1);
    let whisker_high = inside().next_back().unwrap_or(q3);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    BoxStats {
        n: sorted.len(),
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    }
}
