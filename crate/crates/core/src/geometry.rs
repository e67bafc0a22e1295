//! Ellipsoid frames, coordinate transforms and rotation-vector encoding.
//!
//! A frame's rotation stores the principal axes as rows, so it maps world
//! offsets into the ellipsoid's axis-aligned coordinates. Anchors on the
//! unit sphere are scaled by the radii and carried back through the
//! transpose.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Component-wise product.
    pub fn scale(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Squared Euclidean distance. Every nearest-neighbour comparison in the
    /// crate goes through this so that ties are decided identically.
    #[inline]
    pub fn dist_squared(self, o: Vec3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Proper rotation stored row-major; rows are the ordered principal axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3 {
    pub rows: [[f64; 3]; 3],
}

impl Rotation3 {
    pub const IDENTITY: Rotation3 = Rotation3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn row(&self, k: usize) -> Vec3 {
        Vec3::from_array(self.rows[k])
    }

    /// `R · v`
    pub fn apply(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    /// `Rᵀ · v`, i.e. `v` read as a row vector times `R`.
    pub fn apply_transpose(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Rotation3 {
        let r = &self.rows;
        Rotation3::from_rows([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    pub fn mul(&self, o: &Rotation3) -> Rotation3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Rotation3::from_rows(out)
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Largest absolute deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.rows[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, o: &Rotation3) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.rows[i][j] - o.rows[i][j]).abs());
            }
        }
        worst
    }
}

/// Axis-angle encoding of a proper rotation; the angle lies in `[0, π]`.
pub fn rotation_to_rotvec(r: &Rotation3) -> Vec3 {
    let m = &r.rows;
    let trace = m[0][0] + m[1][1] + m[2][2];
    // Shepperd's quaternion extraction picks the numerically largest pivot.
    let (mut w, mut x, mut y, mut z);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[2][1] - m[1][2]) / s;
        y = (m[0][2] - m[2][0]) / s;
        z = (m[1][0] - m[0][1]) / s;
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        w = (m[2][1] - m[1][2]) / s;
        x = 0.25 * s;
        y = (m[0][1] + m[1][0]) / s;
        z = (m[0][2] + m[2][0]) / s;
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        w = (m[0][2] - m[2][0]) / s;
        x = (m[0][1] + m[1][0]) / s;
        y = 0.25 * s;
        z = (m[1][2] + m[2][1]) / s;
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        w = (m[1][0] - m[0][1]) / s;
        x = (m[0][2] + m[2][0]) / s;
        y = (m[1][2] + m[2][1]) / s;
        z = 0.25 * s;
    }
    if w < 0.0 {
        w = -w;
        x = -x;
        y = -y;
        z = -z;
    }
    let n = (x * x + y * y + z * z).sqrt();
    if n < 1e-12 {
        return Vec3::new(2.0 * x, 2.0 * y, 2.0 * z);
    }
    let angle = 2.0 * n.atan2(w);
    Vec3::new(x, y, z) * (angle / n)
}

/// Rodrigues reconstruction of a rotation from its axis-angle vector.
pub fn rotvec_to_rotation(v: Vec3) -> Rotation3 {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-6 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = [[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]];
    let mut rows = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let k2: f64 = (0..3).map(|l| k[i][l] * k[l][j]).sum();
            let id = if i == j { 1.0 } else { 0.0 };
            rows[i][j] = id + a * k[i][j] + b * k2;
        }
    }
    Rotation3::from_rows(rows)
}

/// Nine-value ellipsoid descriptor: rotation vector, radii, center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidFeature {
    pub rotvec: Vec3,
    pub radii: Vec3,
    pub center: Vec3,
}

impl EllipsoidFeature {
    pub fn to_array(&self) -> [f64; 9] {
        let (r, s, c) = (self.rotvec, self.radii, self.center);
        [r.x, r.y, r.z, s.x, s.y, s.z, c.x, c.y, c.z]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            rotvec: Vec3::new(a[0], a[1], a[2]),
            radii: Vec3::new(a[3], a[4], a[5]),
            center: Vec3::new(a[6], a[7], a[8]),
        }
    }

    /// Decodes the rotation vector back into a full frame.
    pub fn frame(&self) -> EllipsoidFrame {
        EllipsoidFrame {
            rotation: rotvec_to_rotation(self.rotvec),
            radii: self.radii,
            center: self.center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidFrame {
    pub rotation: Rotation3,
    /// Half-extents along the rotation's rows, descending.
    pub radii: Vec3,
    pub center: Vec3,
}

/// Smallest radius a fitted frame may carry, relative to its largest one.
pub fn radius_floor(largest: f64) -> f64 {
    (1e-6 * largest).max(1e-9)
}

fn check_cloud(points: &[Vec3]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn normalize_sign(axis: [f64; 3]) -> [f64; 3] {
    let mut pivot = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[pivot].abs() {
            pivot = i;
        }
    }
    if axis[pivot] < 0.0 {
        [-axis[0], -axis[1], -axis[2]]
    } else {
        axis
    }
}

/// Axis-aligned extents of `points` after rotation into `rotation`'s frame.
fn rotated_bounds(points: &[Vec3], rotation: &Rotation3) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &p in points {
        let q = rotation.apply(p);
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    (lo, hi)
}

/// Fits an oriented ellipsoid to `points` by principal component analysis.
///
/// Axes come from the mean-centered covariance; the bounding box is then
/// taken over the rotated (uncentered) points, and its midpoint mapped back
/// to world space gives the center. Axes are ordered by descending extent,
/// with eigenvalue order breaking ties, so the radii are always sorted.
pub fn pca_frame(points: &[Vec3]) -> Result<EllipsoidFrame> {
    check_cloud(points)?;
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) * (1.0 / n);
    let mut cov = Matrix3::<f64>::zeros();
    for &p in points {
        let d = p - mean;
        let d = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = order.map(|c| {
        let col = eig.eigenvectors.column(c);
        let len = col.norm();
        normalize_sign([col[0] / len, col[1] / len, col[2] / len])
    });

    // Reorder by extent so the radii come out descending.
    let (lo, hi) = rotated_bounds(points, &Rotation3::from_rows(axes));
    let mut by_extent = [0usize, 1, 2];
    by_extent.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])));
    axes = by_extent.map(|k| axes[k]);

    let mut rotation = Rotation3::from_rows(axes);
    if rotation.determinant() < 0.0 {
        rotation.rows[2] = [-axes[2][0], -axes[2][1], -axes[2][2]];
    }

    let (lo, hi) = rotated_bounds(points, &rotation);
    let half = [0, 1, 2].map(|k| (hi[k] - lo[k]) / 2.0);
    let floor = radius_floor(half[0].max(half[1]).max(half[2]));
    let radii = Vec3::new(half[0].max(floor), half[1].max(floor), half[2].max(floor));
    let mid = Vec3::new(
        hi[0] / 2.0 + lo[0] / 2.0,
        hi[1] / 2.0 + lo[1] / 2.0,
        hi[2] / 2.0 + lo[2] / 2.0,
    );
    Ok(EllipsoidFrame {
        rotation,
        radii,
        center: rotation.apply_transpose(mid),
    })
}

/// The spherical special case: identity axes, equal radii, centered on the
/// bounding-box midpoint with radius reaching the farthest point.
pub fn circumsphere_frame(points: &[Vec3]) -> Result<EllipsoidFrame> {
    check_cloud(points)?;
    let (lo, hi) = rotated_bounds(points, &Rotation3::IDENTITY);
    let center = Vec3::new(
        hi[0] / 2.0 + lo[0] / 2.0,
        hi[1] / 2.0 + lo[1] / 2.0,
        hi[2] / 2.0 + lo[2] / 2.0,
    );
    let r = points
        .iter()
        .map(|&p| p.dist_squared(center))
        .fold(0.0, f64::max)
        .sqrt();
    let r = r.max(radius_floor(r));
    Ok(EllipsoidFrame {
        rotation: Rotation3::IDENTITY,
        radii: Vec3::new(r, r, r),
        center,
    })
}

impl EllipsoidFrame {
    pub fn feature(&self) -> EllipsoidFeature {
        EllipsoidFeature {
            rotvec: rotation_to_rotvec(&self.rotation),
            radii: self.radii,
            center: self.center,
        }
    }
}

/// World position of a unit-sphere direction on the frame's ellipsoid.
pub fn anchor_world(frame: &EllipsoidFrame, unit: Vec3) -> Vec3 {
    frame.rotation.apply_transpose(unit.scale(frame.radii)) + frame.center
}

/// Ellipsoid-frame coordinates of `p`: rotated about the center and divided
/// by the radii, so the fitted ellipsoid becomes the unit sphere.
pub fn to_local(frame: &EllipsoidFrame, p: Vec3) -> Vec3 {
    let q = frame.rotation.apply(p - frame.center);
    Vec3::new(
        q.x / frame.radii.x,
        q.y / frame.radii.y,
        q.z / frame.radii.z,
    )
}

/// How pixel indices map to sphere angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AnchorMode {
    /// Half-pixel offsets: no duplicated anchors at the poles or the seam.
    #[default]
    Centered,
    /// Literal `u/M`, `v/M` sampling.
    Paper,
}

impl AnchorMode {
    pub fn code(self) -> u8 {
        match self {
            AnchorMode::Paper => 0,
            AnchorMode::Centered => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AnchorMode::Paper),
            1 => Some(AnchorMode::Centered),
            _ => None,
        }
    }
}

/// Unit direction for pixel `(u, v)`: `u` sweeps azimuth over `[0, 2π)`,
/// `v` sweeps the polar angle from the +z pole.
pub fn sphere_anchor(u: usize, v: usize, m: usize, mode: AnchorMode) -> Result<Vec3> {
    if u >= m || v >= m {
        return Err(Error::PixelOutOfRange { u, v, m });
    }
    let offset = match mode {
        AnchorMode::Paper => 0.0,
        AnchorMode::Centered => 0.5,
    };
    let theta = 2.0 * PI * ((u as f64 + offset) / m as f64);
    let phi = PI * ((v as f64 + offset) / m as f64);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Ok(Vec3::new(sp * ct, sp * st, cp))
}
