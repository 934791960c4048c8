use rayon::prelude::*;

use super::{sq_dist, ClusterLabels};
use crate::stats;

/// Density-based clustering.
///
/// A core point has at least `min_pts` points (itself included) within
/// `eps`. Cores connected through core neighborhoods form one cluster;
/// cluster ids follow the lowest core index in each cluster. A non-core
/// point within `eps` of some core joins the cluster of its nearest core
/// (lower index on exact distance ties); anything else is noise.
pub fn dbscan<R: AsRef<[f64]> + Sync>(points: &[R], eps: f64, min_pts: usize) -> ClusterLabels {
    assert!(eps > 0.0, "dbscan eps must be positive");
    assert!(min_pts >= 1, "dbscan min_pts must be at least 1");
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points[i].as_ref();
            (0..n)
                .filter(|&j| sq_dist(p, points[j].as_ref()) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        labels[seed] = Some(next);
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && labels[j].is_none() {
                    labels[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }

    for i in 0..n {
        if core[i] {
            continue;
        }
        let p = points[i].as_ref();
        let mut best: Option<(f64, usize)> = None;
        for &j in neighbors[i].iter().filter(|&&j| core[j]) {
            let d = sq_dist(p, points[j].as_ref());
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        labels[i] = best.and_then(|(_, j)| labels[j]);
    }
    ClusterLabels(labels)
}

/// Median distance from each point to its `k`-th nearest other point.
pub fn suggest_eps<R: AsRef<[f64]> + Sync>(points: &[R], k: usize) -> Option<f64> {
    let n = points.len();
    if n <= k || k == 0 {
        return None;
    }
    let kth: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points[i].as_ref();
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| sq_dist(p, points[j].as_ref()))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect();
    Some(stats::median(&kth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_one_cluster() {
        let pts = vec![[1.0, 1.0]; 6];
        let l = dbscan(&pts, 0.1, 6);
        assert_eq!(l.n_clusters(), 1);
        assert_eq!(l.noise_count(), 0);
    }

    #[test]
    fn isolated_point_is_noise() {
        let l = dbscan(&[[0.0, 0.0]], 1.0, 2);
        assert_eq!(l.0, vec![None]);
    }

    #[test]
    fn border_point_joins_nearest_core() {
        // cores at 0 and 9, each propped up by three points on its far side
        for (border, near) in [(4.2, 0usize), (4.8, 4)] {
            let pts = vec![[0.0], [-4.0], [-4.0], [-4.0], [9.0], [13.0], [13.0], [13.0], [border]];
            let l = dbscan(&pts, 5.0, 4);
            assert_eq!(l.n_clusters(), 2);
            assert_eq!(l.get(8), l.get(near), "border at {border}");
        }
    }

    #[test]
    fn eps_heuristic() {
        let pts: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        // interior points: 4th neighbour at distance 2; ends up to 4
        let e = suggest_eps(&pts, 4).unwrap();
        assert!((2.0..=4.0).contains(&e));
        assert!(suggest_eps(&pts[..3], 4).is_none());
    }
}
