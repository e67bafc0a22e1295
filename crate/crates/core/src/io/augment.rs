//! Training-time augmentation: a random rotation followed by clipped
//! Gaussian jitter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Rotation3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RotationMode {
    None,
    /// Uniform angle about +y.
    #[default]
    UpAxis,
    /// Uniform over all rotations.
    So3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub seed: u64,
    pub rotation: RotationMode,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rotation: RotationMode::UpAxis,
            jitter_sigma: 0.01,
            jitter_clip: 0.05,
        }
    }
}

fn random_rotation(mode: RotationMode, rng: &mut ChaCha8Rng) -> Option<Rotation3> {
    match mode {
        RotationMode::None => None,
        RotationMode::UpAxis => {
            let (s, c) = rng.random_range(0.0..2.0 * PI).sin_cos();
            Some(Rotation3::from_rows([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]))
        }
        RotationMode::So3 => {
            // A normalized 4D Gaussian is a uniform unit quaternion.
            let mut q = [0.0f64; 4];
            loop {
                for x in q.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
                let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-12 {
                    q.iter_mut().for_each(|x| *x /= n);
                    break;
                }
            }
            let [w, x, y, z] = q;
            Some(Rotation3::from_rows([
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
                [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
                [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
            ]))
        }
    }
}

pub fn augment(cloud: &PointCloud, config: &AugmentConfig) -> Result<PointCloud> {
    let AugmentConfig {
        seed,
        rotation,
        jitter_sigma: sigma,
        jitter_clip: clip,
    } = *config;
    if !(sigma >= 0.0 && sigma.is_finite()) || !(clip >= 0.0 && clip.is_finite()) {
        return Err(Error::Config(format!(
            "jitter sigma and clip must be finite and non-negative (got {sigma}, {clip})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = random_rotation(rotation, &mut rng);
    let mut points: Vec<Vec3> = match &rot {
        // Up-axis rotation leaves y untouched bit for bit.
        Some(r) if rotation == RotationMode::UpAxis => cloud
            .points
            .iter()
            .map(|p| {
                let q = r.apply(*p);
                Vec3::new(q.x, p.y, q.z)
            })
            .collect(),
        Some(r) => cloud.points.iter().map(|p| r.apply(*p)).collect(),
        None => cloud.points.clone(),
    };
    if sigma > 0.0 && clip > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma validated above");
        let mut jitter = || normal.sample(&mut rng).clamp(-clip, clip);
        for p in points.iter_mut() {
            *p = *p + Vec3::new(jitter(), jitter(), jitter());
        }
    }
    Ok(PointCloud {
        points,
        labels: cloud.labels.clone(),
    })
}
