use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Eigenvalues of the sample covariance, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Unit direction per component.
    pub components: Vec<Vec<f64>>,
    /// Centered rows projected onto the components.
    #[serde(skip)]
    pub scores: Vec<Vec<f64>>,
    /// Trace of the sample covariance.
    pub total_variance: f64,
}

impl PcaResult {
    /// Maps scores back to the original coordinates.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.scores
            .iter()
            .map(|s| {
                let mut row = self.mean.clone();
                for (w, comp) in s.iter().zip(&self.components) {
                    for (r, c) in row.iter_mut().zip(comp) {
                        *r += w * c;
                    }
                }
                row
            })
            .collect()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|e| if self.total_variance > 0.0 { e / self.total_variance } else { 0.0 })
            .collect()
    }
}

/// Principal components of the sample covariance (n - 1 denominator).
///
/// Each component's sign is fixed so that its largest-magnitude entry is
/// positive, which makes the output deterministic.
pub fn pca<R: AsRef<[f64]>>(rows: &[R], n_components: usize) -> Result<PcaResult> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two rows"));
    }
    let d = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::invalid("PCA rows have inconsistent lengths"));
    }
    if n_components == 0 || n_components > (n - 1).min(d) {
        return Err(Error::invalid(format!(
            "PCA n_components must be in 1..={}, got {n_components}",
            (n - 1).min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i].as_ref()[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut eigenvalues = Vec::with_capacity(n_components);
    let mut components = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
    }
    let scores = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| (0..d).map(|j| centered[(i, j)] * c[j]).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        mean,
        eigenvalues,
        components,
        scores,
        total_variance,
    })
}
