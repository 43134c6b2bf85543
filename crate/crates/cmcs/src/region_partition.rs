//! Region partitioning of check-in locations with mini-batch k-means over
//! haversine distance, plus a full-batch Lloyd variant used as a reference.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CmcsError, Result};
use crate::geo::haversine_km;

/// One sensing region: centroid, member count from the final assignment pass,
/// and a lat/lon bounding box of the assigned points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub centroid: (f64, f64),
    pub count: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Convergence threshold on maximum centroid movement, in degrees.
    pub tol_degrees: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            k: 100,
            batch_size: 3100,
            max_iters: 200,
            seed: 0,
            tol_degrees: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub centroids: Vec<(f64, f64)>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn nearest_centroid(p: (f64, f64), centroids: &[(f64, f64)]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = haversine_km(p, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// k-means++ seeding over a point set (D^2 sampling on haversine distance).
fn kmeans_plus_plus(points: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|&p| haversine_km(p, centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            points[rng.gen_range(0..points.len())]
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
                idx = i;
            }
            points[idx]
        };
        centroids.push(next);
        for (i, &p) in points.iter().enumerate() {
            let d = haversine_km(p, next).powi(2);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn assign_and_inertia(points: &[(f64, f64)], centroids: &[(f64, f64)]) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for &p in points {
        let (c, d) = nearest_centroid(p, centroids);
        assignments.push(c);
        inertia += d * d;
    }
    (assignments, inertia)
}

/// Mini-batch k-means: seed with k-means++ over the first sampled batch,
/// then stream batches applying per-centroid learning rates 1/count. Stops
/// when the largest centroid movement in a batch drops below `tol_degrees`.
pub fn minibatch_kmeans(points: &[(f64, f64)], cfg: &PartitionConfig) -> Result<PartitionResult> {
    if cfg.k == 0 {
        return Err(CmcsError::InvalidArgument("k must be positive".into()));
    }
    if points.len() < cfg.k {
        return Err(CmcsError::InvalidArgument(format!(
            "{} points cannot form {} clusters",
            points.len(),
            cfg.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch_size = cfg.batch_size.min(points.len()).max(cfg.k);

    let seed_batch: Vec<(f64, f64)> = points
        .choose_multiple(&mut rng, batch_size)
        .copied()
        .collect();
    let mut centroids = kmeans_plus_plus(&seed_batch, cfg.k, &mut rng);
    let mut counts = vec![0usize; cfg.k];

    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let batch: Vec<(f64, f64)> = points
            .choose_multiple(&mut rng, batch_size)
            .copied()
            .collect();
        let cached: Vec<usize> = batch
            .iter()
            .map(|&p| nearest_centroid(p, &centroids).0)
            .collect();
        let mut max_move = 0.0f64;
        for (&p, &c) in batch.iter().zip(&cached) {
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            let old = centroids[c];
            centroids[c] = (
                old.0 + eta * (p.0 - old.0),
                old.1 + eta * (p.1 - old.1),
            );
            let moved = (centroids[c].0 - old.0)
                .abs()
                .max((centroids[c].1 - old.1).abs());
            max_move = max_move.max(moved);
        }
        if max_move < cfg.tol_degrees {
            converged = true;
            break;
        }
    }

    let (assignments, inertia) = assign_and_inertia(points, &centroids);
    Ok(PartitionResult {
        centroids,
        assignments,
        inertia,
        iterations,
        converged,
    })
}

/// Full-batch Lloyd k-means on the same haversine objective; centroids are
/// coordinate means of their members. Used as a quality reference.
pub fn lloyd_kmeans(
    points: &[(f64, f64)],
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<PartitionResult> {
    if k == 0 || points.len() < k {
        return Err(CmcsError::InvalidArgument(
            "invalid k for point count".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        iterations += 1;
        let (assignments, _) = assign_and_inertia(points, &centroids);
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&p, &a) in points.iter().zip(&assignments) {
            sums[a].0 += p.0;
            sums[a].1 += p.1;
            sums[a].2 += 1;
        }
        let mut max_move = 0.0f64;
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s.2 == 0 {
                continue;
            }
            let next = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            max_move = max_move
                .max((next.0 - c.0).abs())
                .max((next.1 - c.1).abs());
            *c = next;
        }
        if max_move < 1e-9 {
            converged = true;
            break;
        }
    }
    let (assignments, inertia) = assign_and_inertia(points, &centroids);
    Ok(PartitionResult {
        centroids,
        assignments,
        inertia,
        iterations,
        converged,
    })
}

/// Summarize a partition into regions with bounding boxes. An empty cluster
/// becomes a zero-area box at its centroid.
pub fn region_bounds(points: &[(f64, f64)], result: &PartitionResult) -> Vec<Region> {
    let k = result.centroids.len();
    let mut regions: Vec<Region> = result
        .centroids
        .iter()
        .enumerate()
        .map(|(id, &c)| Region {
            id,
            centroid: c,
            count: 0,
            lat_min: c.0,
            lat_max: c.0,
            lon_min: c.1,
            lon_max: c.1,
        })
        .collect();
    let mut seen = vec![false; k];
    for (&p, &a) in points.iter().zip(&result.assignments) {
        let r = &mut regions[a];
        if !seen[a] {
            r.lat_min = p.0;
            r.lat_max = p.0;
            r.lon_min = p.1;
            r.lon_max = p.1;
            seen[a] = true;
        } else {
            r.lat_min = r.lat_min.min(p.0);
            r.lat_max = r.lat_max.max(p.0);
            r.lon_min = r.lon_min.min(p.1);
            r.lon_max = r.lon_max.max(p.1);
        }
        r.count += 1;
    }
    regions
}

/// Nearest-centroid region lookup; ties break toward the lowest region id.
pub fn assign_to_region(p: (f64, f64), centroids: &[(f64, f64)]) -> usize {
    nearest_centroid(p, centroids).0
}
