//! Exact nearest-neighbour search.
//!
//! The k-d tree splits on the axis of widest spread at the median and keeps
//! small buckets at the leaves. Exact distance ties resolve to the lowest
//! original point index, both here and in [`nearest_bruteforce`].

use crate::error::{Error, Result};
use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Immutable k-d tree over a point list.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    id: u32,
}

impl Best {
    #[inline]
    fn offer(&mut self, d2: f64, id: u32) {
        if d2 < self.d2 || (d2 == self.d2 && id < self.id) {
            self.d2 = d2;
            self.id = id;
        }
    }
}

impl NnIndex {
    pub fn build(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut items: Vec<(Vec3, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(&mut items, 0, &mut nodes);
        let (points, ids) = items.into_iter().unzip();
        Ok(Self { points, ids, nodes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, query: Vec3) -> Neighbor {
        let mut best = Best {
            d2: f64::INFINITY,
            id: u32::MAX,
        };
        self.search(0, query, &mut best);
        Neighbor {
            index: best.id as usize,
            distance: best.d2.sqrt(),
        }
    }

    fn search(&self, node: usize, q: Vec3, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    best.offer(q.dist_squared(self.points[i]), self.ids[i]);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best);
                // `<=` so that equidistant points on the far side still get
                // a chance to win the index tie-break.
                if diff * diff <= best.d2 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build_node(items: &mut [(Vec3, u32)], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if items.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + items.len()) as u32,
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in items.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut axis = 0;
    for k in 1..3 {
        if hi[k] - lo[k] > hi[axis] - lo[axis] {
            axis = k;
        }
    }
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
    });
    let value = items[mid].0[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_items, right_items) = items.split_at_mut(mid);
    let left = build_node(left_items, offset, nodes);
    let right = build_node(right_items, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Linear-scan reference with the same tie rule as [`NnIndex::nearest`].
pub fn nearest_bruteforce(points: &[Vec3], query: Vec3) -> Result<Neighbor> {
    let mut best = Best {
        d2: f64::INFINITY,
        id: u32::MAX,
    };
    for (i, &p) in points.iter().enumerate() {
        best.offer(query.dist_squared(p), i as u32);
    }
    if best.id == u32::MAX {
        return Err(Error::EmptyCloud);
    }
    Ok(Neighbor {
        index: best.id as usize,
        distance: best.d2.sqrt(),
    })
}
