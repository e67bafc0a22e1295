//! Whitespace-separated `x y z [label]` text clouds.

use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(err(line_no, format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let has_label = fields.len() == 4;
        match labeled {
            None => labeled = Some(has_label),
            Some(l) if l != has_label => {
                return Err(err(line_no, "mixed labeled and unlabeled lines".into()));
            }
            _ => {}
        }
        let mut xyz = [0.0; 3];
        for (slot, f) in xyz.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .map_err(|e| err(line_no, format!("bad coordinate {f:?}: {e}")))?;
            if !slot.is_finite() {
                return Err(err(line_no, format!("non-finite coordinate {f:?}")));
            }
        }
        points.push(Vec3::from_array(xyz));
        if has_label {
            let l = fields[3]
                .parse::<u32>()
                .map_err(|e| err(line_no, format!("bad label {:?}: {e}", fields[3])))?;
            labels.push(l);
        }
    }
    if points.is_empty() {
        return Err(err(0, "no points".into()));
    }
    Ok(PointCloud {
        points,
        labels: labeled.unwrap_or(false).then_some(labels),
    })
}

pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_xyz(&super::read_to_string(path)?, path)
}

/// Shortest round-trip formatting, so reloading reproduces every bit.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 64);
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z).unwrap();
        if let Some(labels) = &cloud.labels {
            write!(out, " {}", labels[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    super::write_atomic(path.as_ref(), format_xyz(cloud).as_bytes())
}

/// One integer label per line, as in ShapeNet part `.seg` files.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let text = super::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(line.parse::<u32>().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("bad label {line:?}: {e}"),
        })?);
    }
    Ok(labels)
}
