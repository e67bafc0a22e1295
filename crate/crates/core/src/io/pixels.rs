//! Per-pixel predictions as text: one line per mapped node, in the order
//! of `HierarchicalRepresentation::metric_nodes`, pixels in `v`-major order.
//! Hard labels are one integer per pixel; scores are `classes` numbers per
//! pixel. Blank lines and `#` comments are skipped.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{PixelLabelMap, PixelValues};

/// Parses hard labels, or per-class scores when `score_classes` is given.
/// For hard labels the class count is one past the largest label.
pub fn parse_pixel_labels(text: &str, path: &Path, score_classes: Option<usize>) -> Result<PixelLabelMap> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match score_classes {
        None => {
            let mut maps = Vec::new();
            for (line, l) in rows {
                let row = l
                    .split_whitespace()
                    .map(|f| f.parse::<u32>().map_err(|e| err(line, format!("bad label {f:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                maps.push(row);
            }
            let top = maps.iter().flatten().copied().max();
            Ok(PixelLabelMap {
                num_classes: top.map_or(1, |t| t as usize + 1),
                values: PixelValues::Labels(maps),
            })
        }
        Some(k) => {
            if k == 0 {
                return Err(Error::Config("score class count must be at least 1".into()));
            }
            let mut maps = Vec::new();
            for (line, l) in rows {
                let row = l
                    .split_whitespace()
                    .map(|f| f.parse::<f64>().map_err(|e| err(line, format!("bad score {f:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if row.len() % k != 0 {
                    return Err(err(line, format!("{} scores is not a multiple of {k}", row.len())));
                }
                maps.push(row);
            }
            Ok(PixelLabelMap {
                num_classes: k,
                values: PixelValues::Scores(maps),
            })
        }
    }
}

pub fn format_pixel_labels(pix: &PixelLabelMap) -> String {
    let mut out = String::new();
    match &pix.values {
        PixelValues::Labels(maps) => {
            for m in maps {
                let row: Vec<String> = m.iter().map(u32::to_string).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        PixelValues::Scores(maps) => {
            for m in maps {
                let row: Vec<String> = m.iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let pix = PixelLabelMap {
            num_classes: 4,
            values: PixelValues::Labels(vec![vec![0, 3, 1, 1], vec![2, 2, 2, 0]]),
        };
        let back = parse_pixel_labels(&format_pixel_labels(&pix), Path::new("p"), None).unwrap();
        assert_eq!(back, pix);
    }

    #[test]
    fn scores_round_trip() {
        let pix = PixelLabelMap {
            num_classes: 2,
            values: PixelValues::Scores(vec![vec![0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0]]),
        };
        let back = parse_pixel_labels(&format_pixel_labels(&pix), Path::new("p"), Some(2)).unwrap();
        assert_eq!(back, pix);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_pixel_labels("# header\n0 1\n0 x\n", Path::new("p"), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_pixel_labels("0.5 0.5 0.1\n", Path::new("p"), Some(2)).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    }
}
