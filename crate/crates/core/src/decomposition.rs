//! Seeded k-means decomposition of a cloud into compact partitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    /// Partition index of each point, in `[0, centroids.len())`.
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec3>,
}

impl PartitionAssignment {
    pub fn n_partitions(&self) -> usize {
        self.centroids.len()
    }
}

/// One partition's points with the indices they had in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub points: Vec<Vec3>,
    pub indices: Vec<u32>,
}

fn nearest_centroid(p: Vec3, centroids: &[Vec3]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, &c) in centroids.iter().enumerate() {
        let d = p.dist_squared(c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec3], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.dist_squared(points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Only duplicates of existing centers remain.
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        centroids.push(points[pick]);
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(p.dist_squared(points[pick]));
        }
    }
    centroids
}

fn within_cluster_ss(points: &[Vec3], labels: &[u32], centroids: &[Vec3]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.dist_squared(centroids[l as usize]))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[Vec3], labels: &mut [u32], centroids: &mut [Vec3], counts: &mut [usize]) {
    for empty in 0..centroids.len() {
        if counts[empty] != 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, (&p, &l)) in points.iter().zip(labels.iter()).enumerate() {
            if counts[l as usize] < 2 {
                continue;
            }
            let d = p.dist_squared(centroids[l as usize]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("an empty cluster implies another holds two points");
        counts[labels[i] as usize] -= 1;
        labels[i] = empty as u32;
        counts[empty] = 1;
        centroids[empty] = points[i];
    }
}

/// Lloyd iterations from a k-means++ start until no label changes or
/// [`MAX_ITERATIONS`] is reached. Deterministic in `(points, k, seed)`.
pub fn kmeans_partition(points: &[Vec3], k: usize, seed: u64) -> Result<PartitionAssignment> {
    if k == 0 {
        return Err(Error::ZeroPartitions);
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if k > points.len() {
        return Err(Error::TooManyPartitions { k, n: points.len() });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut labels: Vec<u32> = Vec::new();
    let mut last_wcss = f64::INFINITY;

    for iteration in 0..MAX_ITERATIONS {
        let assigned: Vec<u32> = points.iter().map(|&p| nearest_centroid(p, &centroids).0).collect();
        if iteration > 0 && assigned == labels {
            break;
        }
        labels = assigned;

        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        repair_empty(points, &mut labels, &mut centroids, &mut counts);

        let mut sums = vec![Vec3::ZERO; k];
        for (&p, &l) in points.iter().zip(&labels) {
            sums[l as usize] = sums[l as usize] + p;
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            *c = s * (1.0 / n as f64);
        }

        if cfg!(debug_assertions) {
            let wcss = within_cluster_ss(points, &labels, &centroids);
            debug_assert!(
                wcss <= last_wcss * (1.0 + 1e-9) + 1e-12,
                "within-cluster sum of squares grew: {last_wcss} -> {wcss}"
            );
            last_wcss = wcss;
        }
    }
    Ok(PartitionAssignment { labels, centroids })
}

/// Splits `points` by partition label, preserving input order in each part.
pub fn partition_points(points: &[Vec3], assignment: &PartitionAssignment) -> Result<Vec<Partition>> {
    if assignment.labels.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            actual: assignment.labels.len(),
        });
    }
    let k = assignment.n_partitions();
    let mut parts = vec![
        Partition {
            points: Vec::new(),
            indices: Vec::new(),
        };
        k
    ];
    for (i, (&p, &l)) in points.iter().zip(&assignment.labels).enumerate() {
        let part = parts.get_mut(l as usize).ok_or(Error::LabelOutOfRange {
            label: l,
            classes: k,
        })?;
        part.points.push(p);
        part.indices.push(i as u32);
    }
    Ok(parts)
}
