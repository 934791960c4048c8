use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sq_dist, ClusterLabels};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Serialize)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: ClusterLabels,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
}

/// Lloyd's algorithm from a k-means++ start.
///
/// Randomness comes from a ChaCha8 generator seeded with `seed`, so the
/// result is a pure function of `(points, k, seed)`. Iteration stops at an
/// assignment fixpoint or after [`MAX_LLOYD_ITERATIONS`]. A cluster that
/// empties out is re-seeded at the point farthest from its centroid.
pub fn kmeans<R: AsRef<[f64]>>(points: &[R], k: usize, seed: u64) -> KMeansResult {
    let n = points.len();
    assert!(k >= 1 && k <= n, "kmeans needs 1 <= k <= n (k = {k}, n = {n})");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p.as_ref(), &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            inertia += d;
        }
        history.push(inertia);
        iterations += 1;
        if !changed || iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        update_centroids(points, &labels, &mut centroids);
    }
    KMeansResult {
        centroids,
        labels: ClusterLabels(labels.into_iter().map(Some).collect()),
        inertia: *history.last().unwrap_or(&0.0),
        iterations,
        inertia_history: history,
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.iter().enumerate() {
        let d = sq_dist(p, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: AsRef<[f64]>>(points: &[R], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].as_ref().to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p.as_ref(), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].as_ref().to_vec();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids<R: AsRef<[f64]>>(points: &[R], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = centroids[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p.as_ref()) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                *dst = s / counts[c] as f64;
            }
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            let far = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, sq_dist(p.as_ref(), &centroids[labels[i]])))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            centroids[c] = points[far.0].as_ref().to_vec();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_mean() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        let r = kmeans(&pts, 1, 7);
        assert!((r.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 1.0).abs() < 1e-12);
        // within sum of squares about the mean: 1+1+0 + 1+1+4 = 8
        assert!((r.inertia - 8.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_reproducibility() {
        let pts: Vec<[f64; 2]> = (0..50).map(|i| [(i * 7 % 13) as f64, (i * 3 % 11) as f64]).collect();
        let a = kmeans(&pts, 4, 99);
        let b = kmeans(&pts, 4, 99);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn k_equals_n() {
        let pts = vec![[0.0], [5.0], [9.0]];
        let r = kmeans(&pts, 3, 1);
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.labels.n_clusters(), 3);
    }
}
