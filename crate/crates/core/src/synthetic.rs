//! Seeded part-labeled shapes standing in for a part-segmentation dataset:
//! airplanes, tables, mugs, lamps and chairs assembled from ellipsoids,
//! boxes, cylinders and tori, with globally unique part ids.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::PointCloud;
use crate::geometry::Vec3;
use crate::io::dataset::LabeledObject;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticObject {
    pub category: String,
    pub part_classes: Vec<u32>,
    pub cloud: PointCloud,
}

impl From<SyntheticObject> for LabeledObject {
    fn from(o: SyntheticObject) -> Self {
        LabeledObject {
            cloud: o.cloud,
            part_classes: o.part_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Airplane,
    Table,
    Mug,
    Lamp,
    Chair,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::Airplane,
        Template::Table,
        Template::Mug,
        Template::Lamp,
        Template::Chair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Airplane => "Airplane",
            Template::Table => "Table",
            Template::Mug => "Mug",
            Template::Lamp => "Lamp",
            Template::Chair => "Chair",
        }
    }

    pub fn part_classes(self) -> Vec<u32> {
        match self {
            Template::Airplane => vec![0, 1, 2, 3],
            Template::Table => vec![4, 5],
            Template::Mug => vec![6, 7],
            Template::Lamp => vec![8, 9, 10],
            Template::Chair => vec![11, 12, 13],
        }
    }
}

enum Shape {
    Ellipsoid { center: Vec3, radii: Vec3 },
    Box { center: Vec3, half: Vec3 },
    /// Side wall of a y-aligned cylinder, optionally capped at the bottom.
    Cylinder { base: Vec3, radius: f64, height: f64, bottom: bool },
    /// Torus in the xy plane.
    Torus { center: Vec3, major: f64, minor: f64 },
}

struct Part {
    shape: Shape,
    label: u32,
    /// Share of the object's points.
    weight: f64,
}

fn unit_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v * (1.0 / n);
        }
    }
}

fn sample(shape: &Shape, rng: &mut ChaCha8Rng) -> Vec3 {
    match *shape {
        Shape::Ellipsoid { center, radii } => center + unit_direction(rng).scale(radii),
        Shape::Box { center, half } => {
            let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
            let total: f64 = areas.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut axis = 0;
            while axis < 2 && pick >= areas[axis] {
                pick -= areas[axis];
                axis += 1;
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut p = [0.0; 3];
            for (k, slot) in p.iter_mut().enumerate() {
                *slot = if k == axis {
                    sign * half[k]
                } else {
                    rng.random_range(-1.0..=1.0) * half[k]
                };
            }
            center + Vec3::from_array(p)
        }
        Shape::Cylinder {
            base,
            radius,
            height,
            bottom,
        } => {
            let side = 2.0 * PI * radius * height;
            let cap = if bottom { PI * radius * radius } else { 0.0 };
            let theta = rng.random_range(0.0..2.0 * PI);
            if rng.random::<f64>() * (side + cap) < side {
                base + Vec3::new(radius * theta.cos(), rng.random::<f64>() * height, radius * theta.sin())
            } else {
                let r = radius * rng.random::<f64>().sqrt();
                base + Vec3::new(r * theta.cos(), 0.0, r * theta.sin())
            }
        }
        Shape::Torus {
            center,
            major,
            minor,
        } => {
            let a = rng.random_range(0.0..2.0 * PI);
            let b = rng.random_range(0.0..2.0 * PI);
            let ring = major + minor * b.cos();
            center + Vec3::new(ring * a.cos(), ring * a.sin(), minor * b.sin())
        }
    }
}

fn jittered(rng: &mut ChaCha8Rng, v: f64) -> f64 {
    v * rng.random_range(0.85..1.15)
}

fn parts(template: Template, rng: &mut ChaCha8Rng) -> Vec<Part> {
    let mut j = |v: f64| jittered(rng, v);
    match template {
        Template::Airplane => {
            let span = j(1.8);
            let length = j(2.0);
            vec![
                Part {
                    shape: Shape::Ellipsoid { center: Vec3::ZERO, radii: Vec3::new(length, j(0.22), j(0.22)) },
                    label: 0,
                    weight: 0.4,
                },
                Part {
                    shape: Shape::Box { center: Vec3::new(0.2, 0.0, 0.0), half: Vec3::new(j(0.35), 0.03, span) },
                    label: 1,
                    weight: 0.35,
                },
                Part {
                    shape: Shape::Box { center: Vec3::new(-length * 0.9, 0.3, 0.0), half: Vec3::new(0.2, j(0.3), 0.02) },
                    label: 2,
                    weight: 0.08,
                },
                Part {
                    shape: Shape::Box { center: Vec3::new(-length * 0.9, 0.05, 0.0), half: Vec3::new(0.15, 0.02, j(0.55)) },
                    label: 2,
                    weight: 0.07,
                },
                Part {
                    shape: Shape::Ellipsoid { center: Vec3::new(0.3, -0.15, span * 0.45), radii: Vec3::new(0.3, 0.08, 0.08) },
                    label: 3,
                    weight: 0.05,
                },
                Part {
                    shape: Shape::Ellipsoid { center: Vec3::new(0.3, -0.15, -span * 0.45), radii: Vec3::new(0.3, 0.08, 0.08) },
                    label: 3,
                    weight: 0.05,
                },
            ]
        }
        Template::Table => {
            let (w, d, h) = (j(1.2), j(0.7), j(0.75));
            let mut out = vec![Part {
                shape: Shape::Box { center: Vec3::new(0.0, h, 0.0), half: Vec3::new(w, 0.04, d) },
                label: 4,
                weight: 0.6,
            }];
            for (sx, sz) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                out.push(Part {
                    shape: Shape::Cylinder {
                        base: Vec3::new(sx * (w - 0.1), 0.0, sz * (d - 0.1)),
                        radius: 0.04,
                        height: h,
                        bottom: false,
                    },
                    label: 5,
                    weight: 0.1,
                });
            }
            out
        }
        Template::Mug => {
            let r = j(0.45);
            let h = j(0.9);
            vec![
                Part {
                    shape: Shape::Cylinder { base: Vec3::ZERO, radius: r, height: h, bottom: true },
                    label: 6,
                    weight: 0.8,
                },
                Part {
                    shape: Shape::Torus { center: Vec3::new(r + 0.2, h * 0.5, 0.0), major: 0.25, minor: 0.06 },
                    label: 7,
                    weight: 0.2,
                },
            ]
        }
        Template::Lamp => {
            let pole = j(1.4);
            vec![
                Part {
                    shape: Shape::Cylinder { base: Vec3::ZERO, radius: j(0.35), height: 0.05, bottom: true },
                    label: 8,
                    weight: 0.25,
                },
                Part {
                    shape: Shape::Cylinder { base: Vec3::ZERO, radius: 0.03, height: pole, bottom: false },
                    label: 9,
                    weight: 0.25,
                },
                Part {
                    shape: Shape::Ellipsoid { center: Vec3::new(0.0, pole, 0.0), radii: Vec3::new(j(0.4), j(0.25), j(0.4)) },
                    label: 10,
                    weight: 0.5,
                },
            ]
        }
        Template::Chair => {
            let (w, h) = (j(0.5), j(0.5));
            let mut out = vec![
                Part {
                    shape: Shape::Box { center: Vec3::new(0.0, h, 0.0), half: Vec3::new(w, 0.04, w) },
                    label: 11,
                    weight: 0.35,
                },
                Part {
                    shape: Shape::Box { center: Vec3::new(0.0, h + j(0.5), -w), half: Vec3::new(w, j(0.5), 0.04) },
                    label: 12,
                    weight: 0.35,
                },
            ];
            for (sx, sz) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                out.push(Part {
                    shape: Shape::Cylinder {
                        base: Vec3::new(sx * (w - 0.05), 0.0, sz * (w - 0.05)),
                        radius: 0.03,
                        height: h,
                        bottom: false,
                    },
                    label: 13,
                    weight: 0.075,
                });
            }
            out
        }
    }
}

/// One labeled object of `n` points. Part point counts follow the part
/// weights; the whole object gets a random turn about +y and a random
/// scale.
pub fn synthetic_object(template: Template, n: usize, seed: u64) -> SyntheticObject {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = parts(template, &mut rng);
    let total: f64 = parts.iter().map(|p| p.weight).sum();
    let mut counts: Vec<usize> = parts
        .iter()
        .map(|p| ((p.weight / total) * n as f64).floor() as usize)
        .collect();
    let mut short = n - counts.iter().sum::<usize>();
    let mut i = 0;
    while short > 0 {
        let k = i % counts.len();
        counts[k] += 1;
        short -= 1;
        i += 1;
    }

    let (s, c) = rng.random_range(0.0..2.0 * PI).sin_cos();
    let scale = rng.random_range(0.8..1.2);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (part, &count) in parts.iter().zip(&counts) {
        for _ in 0..count {
            let p = sample(&part.shape, &mut rng);
            points.push(Vec3::new(c * p.x + s * p.z, p.y, -s * p.x + c * p.z) * scale);
            labels.push(part.label);
        }
    }
    SyntheticObject {
        category: template.name().to_string(),
        part_classes: template.part_classes(),
        cloud: PointCloud {
            points,
            labels: Some(labels),
        },
    }
}

/// `count` objects cycling through every template.
pub fn synthetic_suite(count: usize, n: usize, seed: u64) -> Vec<SyntheticObject> {
    (0..count)
        .map(|i| {
            let template = Template::ALL[i % Template::ALL.len()];
            synthetic_object(template, n, seed.wrapping_mul(1000).wrapping_add(i as u64))
        })
        .collect()
}
