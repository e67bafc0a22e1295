//! Per-pixel labels back to per-point labels, and the representation
//! quality metrics built on top of that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::representation::{usage_mask, HierarchicalRepresentation};
use crate::spatial::NnIndex;

/// Pixel values for each metric node of a representation, in node order.
#[derive(Debug, Clone, PartialEq)]
pub enum PixelValues {
    /// One class id per pixel (`m·m` per node).
    Labels(Vec<Vec<u32>>),
    /// `K` class scores per pixel (`m·m·K` per node, class last).
    Scores(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelLabelMap {
    pub num_classes: usize,
    pub values: PixelValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// The point fills at least one pixel; its label comes from those pixels.
    Mapped,
    /// The point fills no pixel and copies its nearest mapped neighbour.
    NnFilled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub labels: Vec<u32>,
    pub provenance: Vec<Provenance>,
}

fn check_shape(rep: &HierarchicalRepresentation, pix: &PixelLabelMap) -> Result<()> {
    let k = pix.num_classes;
    if k == 0 {
        return Err(Error::Shape("pixel label map declares zero classes".into()));
    }
    let sizes: Vec<usize> = rep
        .metric_nodes()
        .map(|n| {
            let m = n.map.as_ref().expect("metric nodes carry maps").m;
            m * m
        })
        .collect();
    let (count, lens): (usize, Vec<usize>) = match &pix.values {
        PixelValues::Labels(maps) => (maps.len(), maps.iter().map(Vec::len).collect()),
        PixelValues::Scores(maps) => (maps.len(), maps.iter().map(|s| s.len() / k).collect()),
    };
    if count != sizes.len() {
        return Err(Error::Shape(format!(
            "{count} pixel maps for {} mapped nodes",
            sizes.len()
        )));
    }
    for (i, (&want, &got)) in sizes.iter().zip(&lens).enumerate() {
        if want != got {
            return Err(Error::Shape(format!("map {i}: {got} pixels, expected {want}")));
        }
    }
    match &pix.values {
        PixelValues::Labels(maps) => {
            if let Some(&label) = maps.iter().flatten().find(|&&l| l as usize >= k) {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        PixelValues::Scores(maps) => {
            for (i, s) in maps.iter().enumerate() {
                if s.len() % k != 0 {
                    return Err(Error::Shape(format!("map {i}: {} scores not divisible by {k}", s.len())));
                }
                if s.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
        }
    }
    Ok(())
}

/// Traces pixel values back to points.
///
/// A point that fills several pixels takes the argmax of the mean of their
/// scores (hard labels count as one-hot). Class ties go to the lower id.
/// Points that fill no pixel copy the label of their nearest mapped point.
pub fn backproject_labels(
    rep: &HierarchicalRepresentation,
    pix: &PixelLabelMap,
    points: &[Vec3],
) -> Result<SegmentationResult> {
    if points.len() != rep.n_points {
        return Err(Error::LengthMismatch {
            expected: rep.n_points,
            actual: points.len(),
        });
    }
    check_shape(rep, pix)?;
    let k = pix.num_classes;
    let n = rep.n_points;
    let mut sums = vec![0.0f64; n * k];
    let mut hits = vec![0u32; n];

    for (node_pos, node) in rep.metric_nodes().enumerate() {
        let map = node.map.as_ref().expect("metric nodes carry maps");
        for (pixel, &point) in map.point_index.iter().enumerate() {
            let p = point as usize;
            hits[p] += 1;
            let acc = &mut sums[p * k..(p + 1) * k];
            match &pix.values {
                PixelValues::Labels(maps) => acc[maps[node_pos][pixel] as usize] += 1.0,
                PixelValues::Scores(maps) => {
                    let s = &maps[node_pos][pixel * k..(pixel + 1) * k];
                    for (a, &x) in acc.iter_mut().zip(s) {
                        *a += x;
                    }
                }
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut provenance = vec![Provenance::NnFilled; n];
    let mut mapped_ids = Vec::new();
    for p in 0..n {
        if hits[p] == 0 {
            continue;
        }
        let count = hits[p] as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for (c, &s) in sums[p * k..(p + 1) * k].iter().enumerate() {
            let mean = s / count;
            if mean > best.1 {
                best = (c, mean);
            }
        }
        labels[p] = best.0 as u32;
        provenance[p] = Provenance::Mapped;
        mapped_ids.push(p);
    }
    if mapped_ids.is_empty() {
        return Err(Error::Shape("representation maps no points".into()));
    }

    if mapped_ids.len() < n {
        let mapped_points: Vec<Vec3> = mapped_ids.iter().map(|&i| points[i]).collect();
        let index = NnIndex::build(&mapped_points)?;
        for p in 0..n {
            if provenance[p] == Provenance::NnFilled {
                let hit = index.nearest(points[p]);
                labels[p] = labels[mapped_ids[hit.index]];
            }
        }
    }
    Ok(SegmentationResult { labels, provenance })
}

/// Fraction of points that fill at least one metric pixel.
pub fn point_usage_rate(rep: &HierarchicalRepresentation) -> f64 {
    let mask = usage_mask(rep);
    mask.iter().filter(|&&b| b).count() as f64 / rep.n_points as f64
}

/// Mean IoU over `part_classes` for one shape. Classes absent from both
/// prediction and ground truth score 1.
pub fn instance_miou(pred: &[u32], gt: &[u32], part_classes: &[u32]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if part_classes.is_empty() {
        return Err(Error::Shape("no part classes to average over".into()));
    }
    let total: f64 = part_classes
        .iter()
        .map(|&c| {
            let mut inter = 0usize;
            let mut union = 0usize;
            for (&p, &g) in pred.iter().zip(gt) {
                let (a, b) = (p == c, g == c);
                inter += (a && b) as usize;
                union += (a || b) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / part_classes.len() as f64)
}

/// Distinct labels in ascending order.
pub fn present_classes(labels: &[u32]) -> Vec<u32> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// Upper bound on segmentation quality: every pixel carries the true label
/// of the point filling it, and the result is back-projected and scored.
/// Without `part_classes`, the classes present in `gt` are used.
pub fn max_segmentation_iou(
    rep: &HierarchicalRepresentation,
    points: &[Vec3],
    gt: &[u32],
    part_classes: Option<&[u32]>,
) -> Result<f64> {
    if gt.len() != rep.n_points {
        return Err(Error::LengthMismatch {
            expected: rep.n_points,
            actual: gt.len(),
        });
    }
    let num_classes = gt.iter().copied().max().map_or(1, |m| m as usize + 1);
    let maps = rep
        .metric_nodes()
        .map(|n| {
            let map = n.map.as_ref().expect("metric nodes carry maps");
            map.point_index.iter().map(|&i| gt[i as usize]).collect()
        })
        .collect();
    let pix = PixelLabelMap {
        num_classes,
        values: PixelValues::Labels(maps),
    };
    let result = backproject_labels(rep, &pix, points)?;
    let owned;
    let classes = match part_classes {
        Some(c) => c,
        None => {
            owned = present_classes(gt);
            &owned
        }
    };
    instance_miou(&result.labels, gt, classes)
}
