use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wilson score interval for `k` successes in `n` trials at confidence `level`.
pub fn binomial_ci(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n >= 1 && k <= n, "binomial_ci needs 0 <= k <= n and n >= 1");
    let z = normal_quantile(0.5 + level / 2.0);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
