//! Unsupervised learning primitives: PCA, DBSCAN and seeded k-means.
//!
//! Points are passed as slices of rows (`&[R]` with `R: AsRef<[f64]>`),
//! one observation per row.

mod dbscan;
mod kmeans;
mod pca;

use std::io::Write;

use serde::Serialize;

pub use dbscan::{dbscan, suggest_eps};
pub use kmeans::{kmeans, KMeansResult, MAX_LLOYD_ITERATIONS};
pub use pca::{pca, PcaResult};

/// Cluster id per row; `None` marks DBSCAN noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterLabels(pub Vec<Option<usize>>);

impl ClusterLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.0.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn noise_count(&self) -> usize {
        self.0.iter().filter(|l| l.is_none()).count()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.0[i]
    }

    /// Member indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, l) in self.0.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }

    /// Writes `row_index,label` with -1 for noise.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row_index,label")?;
        for (i, l) in self.0.iter().enumerate() {
            match l {
                Some(c) => writeln!(w, "{i},{c}")?,
                None => writeln!(w, "{i},-1")?,
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_helpers() {
        let l = ClusterLabels(vec![Some(0), None, Some(1), Some(0)]);
        assert_eq!(l.n_clusters(), 2);
        assert_eq!(l.noise_count(), 1);
        assert_eq!(l.members(), vec![vec![0, 3], vec![2]]);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row_index,label\n0,0\n1,-1\n2,1\n3,0\n");
    }
}
