//! K-means clustering over hemodynamic feature vectors.
//!
//! Lloyd's algorithm with k-means++ seeding, restarted from multiple seeds
//! and keeping the lowest within-cluster sum of squares. All randomness
//! flows through [`crate::seed::derive_seed`], so results are reproducible
//! across runs and platforms. Tie-breaking is explicit everywhere: nearest
//! assignments prefer the lowest centroid index, restarts keep the earliest
//! best solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::N_FEATURES;
use crate::scalar::Real;
use crate::seed::derive_seed;

/// Restart and iteration budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 50,
            max_iter: 300,
        }
    }
}

/// Clustering result: `centroids[assignment[i]]` is the nearest centroid of
/// point `i`, and `sse` the summed squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<T> {
    pub centroids: Vec<[T; N_FEATURES]>,
    pub assignment: Vec<usize>,
    pub sse: T,
}

pub fn dist2<T: Real>(a: &[T; N_FEATURES], b: &[T; N_FEATURES]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        s += d * d;
    }
    s
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest<T: Real>(point: &[T; N_FEATURES], centroids: &[[T; N_FEATURES]]) -> usize {
    let mut best = 0;
    let mut best_d = dist2(point, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn seed_plus_plus<T: Real>(
    points: &[[T; N_FEATURES]],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<[T; N_FEATURES]> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| dist2(p, &centroids[0]).to_f64().unwrap_or(0.0))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining mass is on duplicates; fall back to uniform.
            rng.gen_range(0..n)
        };
        centroids.push(points[next]);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, centroids.last().unwrap()).to_f64().unwrap_or(0.0);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn lloyd<T: Real>(
    points: &[[T; N_FEATURES]],
    mut centroids: Vec<[T; N_FEATURES]>,
    max_iter: usize,
) -> KMeans<T> {
    let n = points.len();
    let k = centroids.len();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let j = nearest(p, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[T::zero(); N_FEATURES]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignment) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += *x;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // Reseed an empty cluster on the point farthest from its
                // current centroid (lowest index on ties).
                let mut far = 0;
                let mut far_d = T::neg_infinity();
                for (i, p) in points.iter().enumerate() {
                    let d = dist2(p, &centroids[assignment[i]]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[j] = points[far];
            } else {
                let m = T::from_usize_lossy(counts[j]);
                for (c, s) in centroids[j].iter_mut().zip(&sums[j]) {
                    *c = *s / m;
                }
            }
        }
    }
    let sse = points
        .iter()
        .zip(&assignment)
        .map(|(p, &j)| dist2(p, &centroids[j]))
        .sum();
    KMeans {
        centroids,
        assignment,
        sse,
    }
}

/// Cluster `points` into `k` groups. `seed` scopes the whole restart batch.
pub fn kmeans<T: Real>(
    points: &[[T; N_FEATURES]],
    k: usize,
    cfg: &KMeansConfig,
    seed: u64,
) -> Result<KMeans<T>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no points to cluster".into()));
    }
    if k == 0 {
        return Err(Error::InvalidField("k must be positive".into()));
    }
    if k > points.len() {
        return Err(Error::InsufficientData(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let mut best: Option<KMeans<T>> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "kmeans-restart", r as u64));
        let init = seed_plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, cfg.max_iter);
        let better = match &best {
            None => true,
            Some(b) => run.sse < b.sse,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}
