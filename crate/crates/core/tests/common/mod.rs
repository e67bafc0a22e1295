//! Reference implementations used only by the tests. Nothing here calls the
//! library's fitting, search or back-projection code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ellipsoid_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
    let mut r = rng(seed);
    let scale = Vec3::new(r.random_range(0.5..3.0), r.random_range(0.3..2.0), r.random_range(0.1..1.0));
    (0..n)
        .map(|_| {
            Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
                .scale(scale)
        })
        .collect()
}

/// Uniform random rotation as row-major rows, from a normalized quaternion.
pub fn random_rotation(r: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (r.random(), r.random(), r.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix. Returns
/// (eigenvalues, eigenvectors as rows) sorted by descending eigenvalue.
pub fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = order.map(|i| a[i][i]);
    let vecs = order.map(|i| [v[0][i], v[1][i], v[2][i]]);
    (vals, vecs)
}

pub fn covariance(points: &[Vec3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for (k, m) in mean.iter_mut().enumerate() {
            *m += p[k] / n;
        }
    }
    let mut c = [[0.0; 3]; 3];
    for p in points {
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    c
}

/// Output of the straight-line transcription below.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMap {
    pub point_index: Vec<u32>,
    /// Channels per pixel: world (3), local (3), unit anchor (3), u/m, v/m.
    pub channels: Vec<[f64; 11]>,
}

/// Ellipsoid representation of one cloud written out step by step, given
/// the principal axes `v` (rows). Nearest neighbours come from a linear
/// scan.
pub fn algorithm_oracle(points: &[Vec3], ids: &[u32], v: [[f64; 3]; 3], m: usize, centered: bool) -> OracleMap {
    // P1 = P Vᵀ
    let p1: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for k in 0..3 {
                q[k] = v[k][0] * p.x + v[k][1] * p.y + v[k][2] * p.z;
            }
            q
        })
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for q in &p1 {
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    let mut radii = [0.0; 3];
    for k in 0..3 {
        radii[k] = (hi[k] - lo[k]) / 2.0;
    }
    let largest = radii[0].max(radii[1]).max(radii[2]);
    let floor = (1e-6 * largest).max(1e-9);
    for r in radii.iter_mut() {
        *r = r.max(floor);
    }
    // t = (max/2 + min/2) V, a world-space center
    let mut mid = [0.0; 3];
    for k in 0..3 {
        mid[k] = hi[k] / 2.0 + lo[k] / 2.0;
    }
    let mut t = [0.0; 3];
    for i in 0..3 {
        t[i] = v[0][i] * mid[0] + v[1][i] * mid[1] + v[2][i] * mid[2];
    }

    let offset = if centered { 0.5 } else { 0.0 };
    let mut point_index = Vec::new();
    let mut channels = Vec::new();
    for row in 0..m {
        for col in 0..m {
            let theta = 2.0 * PI * ((col as f64 + offset) / m as f64);
            let phi = PI * ((row as f64 + offset) / m as f64);
            let (sp, cp) = phi.sin_cos();
            let (st, ct) = theta.sin_cos();
            let sphere = [sp * ct, sp * st, cp];
            let scaled = [sphere[0] * radii[0], sphere[1] * radii[1], sphere[2] * radii[2]];
            let mut anchor = [0.0; 3];
            for i in 0..3 {
                anchor[i] = v[0][i] * scaled[0] + v[1][i] * scaled[1] + v[2][i] * scaled[2] + t[i];
            }
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, p) in points.iter().enumerate() {
                let (dx, dy, dz) = (anchor[0] - p.x, anchor[1] - p.y, anchor[2] - p.z);
                let d = dx * dx + dy * dy + dz * dz;
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            let p = points[best];
            let rel = [p.x - t[0], p.y - t[1], p.z - t[2]];
            let mut local = [0.0; 3];
            for k in 0..3 {
                local[k] = (v[k][0] * rel[0] + v[k][1] * rel[1] + v[k][2] * rel[2]) / radii[k];
            }
            point_index.push(ids[best]);
            channels.push([
                p.x,
                p.y,
                p.z,
                local[0],
                local[1],
                local[2],
                sphere[0],
                sphere[1],
                sphere[2],
                col as f64 / m as f64,
                row as f64 / m as f64,
            ]);
        }
    }
    OracleMap {
        point_index,
        channels,
    }
}

/// Back-projection written as three separate rules: collect every pixel a
/// point fills, average the one-hot votes and take the first maximum, then
/// copy the closest labelled point for the rest.
pub fn backproject_oracle(
    maps: &[(Vec<u32>, Vec<u32>)],
    points: &[Vec3],
    num_classes: usize,
) -> Vec<u32> {
    let mut votes: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (point_index, labels) in maps {
        for (&p, &l) in point_index.iter().zip(labels) {
            votes.entry(p as usize).or_default().push(l);
        }
    }
    let mut out: Vec<Option<u32>> = vec![None; points.len()];
    for (&p, ls) in &votes {
        let mut mean = vec![0.0; num_classes];
        for &l in ls {
            mean[l as usize] += 1.0 / ls.len() as f64;
        }
        let mut best = 0;
        for c in 1..num_classes {
            if mean[c] > mean[best] {
                best = c;
            }
        }
        out[p] = Some(best as u32);
    }
    let known: Vec<usize> = votes.keys().copied().collect();
    (0..points.len())
        .map(|i| {
            out[i].unwrap_or_else(|| {
                let mut best = known[0];
                for &k in &known {
                    let d = (points[i] - points[k]).norm_squared();
                    let db = (points[i] - points[best]).norm_squared();
                    if d < db {
                        best = k;
                    }
                }
                out[best].unwrap()
            })
        })
        .collect()
}
