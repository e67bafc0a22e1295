//! Manifest-driven dataset evaluation and the metrics report.
//!
//! A manifest is JSON:
//!
//! ```json
//! {
//!   "root": "shapenet",
//!   "categories": { "Airplane": [0, 1, 2, 3], "Mug": [36, 37] },
//!   "entries": [
//!     { "cloud": "02691156/abc.xyz", "labels": "02691156/abc.seg", "category": "Airplane" }
//!   ]
//! }
//! ```
//!
//! `root` is resolved against the manifest's directory. `labels` is optional
//! when the cloud file carries a fourth label column.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::metrics::{max_segmentation_iou, point_usage_rate};
use crate::representation::{represent_hierarchical, FrameFit, ReprConfig};

use super::xyz::{load_labels, load_xyz};

pub const THREADS_ENV: &str = "ELLIPSOID_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cloud: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub root: PathBuf,
    /// Part classes belonging to each category.
    pub categories: BTreeMap<String, Vec<u32>>,
    pub entries: Vec<ManifestEntry>,
}

/// A loaded object: labeled points plus its category's part classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledObject {
    pub cloud: PointCloud,
    pub part_classes: Vec<u32>,
}

impl DatasetManifest {
    /// Parses and checks the manifest. `root` comes back absolute or
    /// relative to the current directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = super::read_to_string(path)?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        manifest.root = base.join(&manifest.root);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if !self.categories.contains_key(&e.category) {
                return Err(Error::Manifest(format!(
                    "entry {i}: unknown category {:?}",
                    e.category
                )));
            }
            let files = std::iter::once(&e.cloud).chain(e.labels.as_ref());
            for f in files {
                let full = self.root.join(f);
                if !full.is_file() {
                    return Err(Error::Manifest(format!(
                        "entry {i}: missing file {}",
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load_object(&self, index: usize) -> Result<LabeledObject> {
        let entry = &self.entries[index];
        let mut cloud = load_xyz(self.root.join(&entry.cloud))?;
        if let Some(lp) = &entry.labels {
            let labels = load_labels(self.root.join(lp))?;
            cloud = PointCloud::with_labels(cloud.points, labels)?;
        }
        if cloud.labels.is_none() {
            return Err(Error::Manifest(format!(
                "entry {index}: {} has no labels",
                entry.cloud.display()
            )));
        }
        let part_classes = self.categories[&entry.category].clone();
        Ok(LabeledObject {
            cloud,
            part_classes,
        })
    }

    pub fn load_all(&self) -> Result<Vec<LabeledObject>> {
        (0..self.entries.len())
            .into_par_iter()
            .map(|i| self.load_object(i))
            .collect()
    }
}

/// Worker pool sized by `ELLIPSOID_THREADS`, or by the logical core count.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScore {
    pub usage: f64,
    pub max_iou: f64,
}

pub fn score_object(object: &LabeledObject, config: &ReprConfig) -> Result<ObjectScore> {
    let rep = represent_hierarchical(&object.cloud.points, config)?;
    let gt = object.cloud.labels.as_deref().expect("labeled object");
    Ok(ObjectScore {
        usage: point_usage_rate(&rep),
        max_iou: max_segmentation_iou(&rep, &object.cloud.points, gt, Some(&object.part_classes))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub config: ReprConfig,
    pub objects: usize,
    pub point_usage_rate: f64,
    pub max_seg_iou: f64,
}

/// Mean usage and max IoU over `objects`. Objects run in parallel; the
/// means are summed in input order.
pub fn evaluate(objects: &[LabeledObject], config: &ReprConfig) -> Result<MetricsRow> {
    let per_object = ReprConfig {
        parallel: false,
        root_map: config.levels == 1,
        ..config.clone()
    };
    let scores: Vec<ObjectScore> = objects
        .par_iter()
        .map(|o| score_object(o, &per_object))
        .collect::<Result<_>>()?;
    let n = scores.len().max(1) as f64;
    let mut usage = 0.0;
    let mut iou = 0.0;
    for s in &scores {
        usage += s.usage;
        iou += s.max_iou;
    }
    Ok(MetricsRow {
        config: config.clone(),
        objects: scores.len(),
        point_usage_rate: usage / n,
        max_seg_iou: iou / n,
    })
}

/// Axes of a metrics sweep; every combination becomes one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub base: ReprConfig,
    pub levels: Vec<usize>,
    pub partitions: Vec<usize>,
    pub resolutions: Vec<usize>,
    /// Also emit single-level circumsphere rows at each resolution.
    pub spherical_baseline: bool,
}

impl Sweep {
    pub fn configs(&self) -> Vec<ReprConfig> {
        let mut out = Vec::new();
        if self.spherical_baseline {
            for &m in &self.resolutions {
                out.push(ReprConfig {
                    levels: 1,
                    resolution: m,
                    frame_fit: FrameFit::Circumsphere,
                    ..self.base.clone()
                });
            }
        }
        for &levels in &self.levels {
            let parts: &[usize] = if levels > 1 { &self.partitions } else { &[0] };
            for &k in parts {
                for &m in &self.resolutions {
                    out.push(ReprConfig {
                        levels,
                        partitions: if levels > 1 { k } else { self.base.partitions },
                        resolution: m,
                        frame_fit: FrameFit::Pca,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

pub fn run_sweep(objects: &[LabeledObject], sweep: &Sweep) -> Result<Vec<MetricsRow>> {
    sweep.configs().iter().map(|c| evaluate(objects, c)).collect()
}

/// Short human-readable name such as `ellipsoid 36x16^2`.
pub fn config_label(c: &ReprConfig) -> String {
    let kind = match (c.frame_fit, c.levels) {
        (FrameFit::Circumsphere, _) => "spherical",
        (FrameFit::Pca, 1) => "ellipsoid-single",
        (FrameFit::Pca, _) => "ellipsoid-multi",
    };
    let maps = if c.levels > 1 {
        format!("{}x{}^2", c.partitions.pow(c.levels as u32 - 1), c.resolution)
    } else {
        format!("{}^2", c.resolution)
    };
    format!("{kind} {maps}")
}

pub const REPORT_HEADER: &str =
    "representation\tlevels\tpartitions\tresolution\tanchor\tseed\tobjects\tpoint_usage_rate\tmax_seg_iou";

pub fn format_report(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.config;
        let anchor = match c.anchor_mode {
            crate::geometry::AnchorMode::Centered => "centered",
            crate::geometry::AnchorMode::Paper => "paper",
        };
        let partitions = if c.levels > 1 { c.partitions } else { 1 };
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            config_label(c),
            c.levels,
            partitions,
            c.resolution,
            anchor,
            c.seed,
            r.objects,
            r.point_usage_rate,
            r.max_seg_iou
        )
        .unwrap();
    }
    out
}
