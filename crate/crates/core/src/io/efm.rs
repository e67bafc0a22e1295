//! EFM: little-endian binary container for one hierarchical representation.
//!
//! ```text
//! header   "EFM1" | u32 version=1 | u32 N | u32 node_count | u32 levels
//!          | u32 C | u8 anchor_mode | u8 channel_flags | u16 reserved=0
//! node     u32 level | u32 parent (0xFFFFFFFF for the root)
//!          | u32 member_count | member_count × u32
//!          | 9 × f64 (rotvec, radii, center) | u8 has_map
//!          [ u32 M | M·M·C × f64 (v, u, channel) | M·M × u32 point_index ]
//! ```
//!
//! `anchor_mode` is 0 for the literal `u/M` grid and 1 for the half-pixel
//! grid. Channel flag bits: world position 1, local position 2, sphere
//! anchor 4, pixel coordinates 8.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{AnchorMode, EllipsoidFeature};
use crate::representation::{ChannelLayout, EllipsoidNode, FeatureMap, HierarchicalRepresentation};

pub const MAGIC: &[u8; 4] = b"EFM1";
pub const VERSION: u32 = 1;
const NO_PARENT: u32 = u32::MAX;

pub fn encode_efm(rep: &HierarchicalRepresentation) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
    out.extend_from_slice(MAGIC);
    u32le(&mut out, VERSION);
    u32le(&mut out, rep.n_points as u32);
    u32le(&mut out, rep.nodes.len() as u32);
    u32le(&mut out, rep.levels as u32);
    u32le(&mut out, rep.layout.channels() as u32);
    out.push(rep.anchor_mode.code());
    out.push(rep.layout.flags());
    out.extend_from_slice(&0u16.to_le_bytes());
    for node in &rep.nodes {
        u32le(&mut out, node.level);
        u32le(&mut out, node.parent.map_or(NO_PARENT, |p| p as u32));
        u32le(&mut out, node.members.len() as u32);
        for &m in &node.members {
            u32le(&mut out, m);
        }
        for x in node.feature.to_array() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        match &node.map {
            None => out.push(0),
            Some(map) => {
                out.push(1);
                u32le(&mut out, map.m as u32);
                for x in &map.data {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for &i in &map.point_index {
                    u32le(&mut out, i);
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, offset: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset,
            msg: msg.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.fail(
                self.pos,
                format!("truncated: {what} needs {n} bytes, {} remain", self.buf.len() - self.pos),
            );
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Fails before allocating when `count` items of `width` bytes cannot fit.
    fn reserve(&self, count: usize, width: usize, what: &str) -> Result<()> {
        match count.checked_mul(width) {
            Some(n) if n <= self.buf.len() - self.pos => Ok(()),
            _ => self.fail(self.pos, format!("truncated: {count} {what} do not fit in the file")),
        }
    }
}

pub fn decode_efm(bytes: &[u8]) -> Result<HierarchicalRepresentation> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.fail(0, "bad magic");
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return r.fail(4, format!("unsupported version {version}"));
    }
    let n_points = r.u32("point count")? as usize;
    let node_count = r.u32("node count")? as usize;
    if node_count == 0 {
        return r.fail(12, "no nodes");
    }
    let levels = r.u32("level count")?;
    if levels == 0 {
        return r.fail(16, "zero levels");
    }
    let channels = r.u32("channel count")? as usize;
    let mode_code = r.u8("anchor mode")?;
    let Some(anchor_mode) = AnchorMode::from_code(mode_code) else {
        return r.fail(24, format!("unknown anchor mode {mode_code}"));
    };
    let flags = r.u8("channel flags")?;
    let layout = match ChannelLayout::from_flags(flags) {
        Ok(l) => l,
        Err(e) => return r.fail(25, e.to_string()),
    };
    if layout.channels() != channels {
        return r.fail(20, format!("channel count {channels} disagrees with flags {flags:#04x}"));
    }
    if r.u16("reserved")? != 0 {
        return r.fail(26, "reserved field is not zero");
    }

    let mut nodes: Vec<EllipsoidNode> = Vec::new();
    for idx in 0..node_count {
        let at = r.pos;
        let level = r.u32("node level")?;
        if level >= levels {
            return r.fail(at, format!("node {idx}: level {level} not below {levels}"));
        }
        let parent_at = r.pos;
        let parent = match r.u32("node parent")? {
            NO_PARENT => None,
            p => Some(p as usize),
        };
        match (idx, parent) {
            (0, None) if level == 0 => {}
            (0, _) => return r.fail(at, "first node must be the level-0 root"),
            (_, None) => return r.fail(parent_at, format!("node {idx}: missing parent")),
            (_, Some(p)) if p >= idx || nodes[p].level + 1 != level => {
                return r.fail(parent_at, format!("node {idx}: invalid parent {p}"));
            }
            _ => {}
        }
        let count = r.u32("member count")? as usize;
        r.reserve(count, 4, "member indices")?;
        let members_at = r.pos;
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            members.push(r.u32("member index")?);
        }
        if members.iter().any(|&m| m as usize >= n_points) {
            return r.fail(members_at, format!("node {idx}: member index out of range"));
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return r.fail(members_at, format!("node {idx}: members not strictly ascending"));
        }
        let mut feat = [0.0; 9];
        for x in feat.iter_mut() {
            *x = r.f64("ellipsoid feature")?;
        }
        let flag_at = r.pos;
        let map = match r.u8("map flag")? {
            0 => None,
            1 => {
                let m_at = r.pos;
                let m = r.u32("map resolution")? as usize;
                if m == 0 {
                    return r.fail(m_at, format!("node {idx}: zero map resolution"));
                }
                let pixels = m.saturating_mul(m);
                r.reserve(pixels.saturating_mul(channels), 8, "map values")?;
                let data = (0..pixels * channels)
                    .map(|_| r.f64("map value"))
                    .collect::<Result<Vec<_>>>()?;
                r.reserve(pixels, 4, "point indices")?;
                let index_at = r.pos;
                let point_index = (0..pixels)
                    .map(|_| r.u32("point index"))
                    .collect::<Result<Vec<_>>>()?;
                if point_index.iter().any(|&i| i as usize >= n_points) {
                    return r.fail(index_at, format!("node {idx}: point index out of range"));
                }
                Some(FeatureMap {
                    m,
                    layout,
                    data,
                    point_index,
                })
            }
            other => return r.fail(flag_at, format!("node {idx}: bad map flag {other}")),
        };
        nodes.push(EllipsoidNode {
            level,
            parent,
            members,
            feature: EllipsoidFeature::from_array(feat),
            map,
        });
    }
    if r.pos != bytes.len() {
        return r.fail(r.pos, format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(HierarchicalRepresentation {
        n_points,
        levels: levels as usize,
        layout,
        anchor_mode,
        nodes,
    })
}

/// Writes atomically: on error no file (or the previous file) remains.
pub fn write_efm(rep: &HierarchicalRepresentation, path: impl AsRef<Path>) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_efm(rep))
}

pub fn read_efm(path: impl AsRef<Path>) -> Result<HierarchicalRepresentation> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_efm(&bytes)
}
