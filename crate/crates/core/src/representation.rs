//! Ellipsoid feature maps and their multi-level hierarchy.
//!
//! Every pixel of a map is filled from the pixel's side: the pixel's anchor
//! on the fitted ellipsoid queries its nearest cloud point, so maps are
//! always dense. A point may fill many pixels or none.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{kmeans_partition, partition_points};
use crate::error::{Error, Result};
use crate::geometry::{
    anchor_world, circumsphere_frame, pca_frame, sphere_anchor, to_local, AnchorMode,
    EllipsoidFeature, EllipsoidFrame, Vec3,
};
use crate::spatial::NnIndex;

/// Which point-wise feature groups a map carries, in this channel order:
/// world position (3), local position (3), sphere anchor (3), pixel
/// coordinates (2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub world_position: bool,
    pub local_position: bool,
    pub sphere_anchor: bool,
    pub pixel_coords: bool,
}

impl ChannelLayout {
    /// Position in the ellipsoid frame only.
    pub const LOCAL: ChannelLayout = ChannelLayout {
        world_position: false,
        local_position: true,
        sphere_anchor: false,
        pixel_coords: false,
    };

    pub const FULL: ChannelLayout = ChannelLayout {
        world_position: true,
        local_position: true,
        sphere_anchor: true,
        pixel_coords: true,
    };

    pub fn channels(&self) -> usize {
        3 * (self.world_position as usize + self.local_position as usize + self.sphere_anchor as usize)
            + 2 * self.pixel_coords as usize
    }

    pub fn flags(&self) -> u8 {
        self.world_position as u8
            | (self.local_position as u8) << 1
            | (self.sphere_anchor as u8) << 2
            | (self.pixel_coords as u8) << 3
    }

    pub fn from_flags(flags: u8) -> Result<Self> {
        if flags == 0 || flags & !0x0f != 0 {
            return Err(Error::Config(format!("invalid channel flags {flags:#04x}")));
        }
        Ok(Self {
            world_position: flags & 1 != 0,
            local_position: flags & 2 != 0,
            sphere_anchor: flags & 4 != 0,
            pixel_coords: flags & 8 != 0,
        })
    }

    /// Offset of each enabled group inside a pixel's channel slice.
    pub fn offsets(&self) -> ChannelOffsets {
        let mut next = 0;
        let mut take = |on: bool, width: usize| {
            on.then(|| {
                let at = next;
                next += width;
                at
            })
        };
        ChannelOffsets {
            world_position: take(self.world_position, 3),
            local_position: take(self.local_position, 3),
            sphere_anchor: take(self.sphere_anchor, 3),
            pixel_coords: take(self.pixel_coords, 2),
        }
    }
}

impl Default for ChannelLayout {
    fn default() -> Self {
        Self::LOCAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelOffsets {
    pub world_position: Option<usize>,
    pub local_position: Option<usize>,
    pub sphere_anchor: Option<usize>,
    pub pixel_coords: Option<usize>,
}

/// Dense `m × m × C` feature grid. Row index is `v`, column index `u`,
/// channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub m: usize,
    pub layout: ChannelLayout,
    pub data: Vec<f64>,
    /// Global (level-0) index of the point filling each pixel.
    pub point_index: Vec<u32>,
}

impl FeatureMap {
    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let c = self.layout.channels();
        let at = (v * self.m + u) * c;
        &self.data[at..at + c]
    }

    pub fn point_at(&self, u: usize, v: usize) -> u32 {
        self.point_index[v * self.m + u]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidNode {
    pub level: u32,
    /// Position of the parent in [`HierarchicalRepresentation::nodes`].
    pub parent: Option<usize>,
    /// Global indices of the points this ellipsoid covers, ascending.
    pub members: Vec<u32>,
    pub feature: EllipsoidFeature,
    pub map: Option<FeatureMap>,
}

impl EllipsoidNode {
    pub fn frame(&self) -> EllipsoidFrame {
        self.feature.frame()
    }
}

/// How each node's ellipsoid is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FrameFit {
    #[default]
    Pca,
    /// Identity axes and equal radii; the spherical comparison baseline.
    Circumsphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprConfig {
    /// Number of hierarchy levels including the whole-cloud root.
    pub levels: usize,
    /// Partitions per decomposed node.
    pub partitions: usize,
    pub resolution: usize,
    pub layout: ChannelLayout,
    pub anchor_mode: AnchorMode,
    pub seed: u64,
    pub frame_fit: FrameFit,
    /// Emit a feature map for the root even when deeper levels exist.
    pub root_map: bool,
    pub parallel: bool,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            partitions: 36,
            resolution: 32,
            layout: ChannelLayout::LOCAL,
            anchor_mode: AnchorMode::Centered,
            seed: 0,
            frame_fit: FrameFit::Pca,
            root_map: true,
            parallel: true,
        }
    }
}

/// Nodes in breadth-first order; parents always precede their children.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalRepresentation {
    pub n_points: usize,
    pub levels: usize,
    pub layout: ChannelLayout,
    pub anchor_mode: AnchorMode,
    pub nodes: Vec<EllipsoidNode>,
}

impl HierarchicalRepresentation {
    /// Deepest level carrying at least one feature map.
    pub fn mapped_level(&self) -> Option<u32> {
        self.nodes
            .iter()
            .filter(|n| n.map.is_some())
            .map(|n| n.level)
            .max()
    }

    /// Nodes whose maps count toward usage and back-projection, in order.
    pub fn metric_nodes(&self) -> impl Iterator<Item = &EllipsoidNode> {
        let level = self.mapped_level();
        self.nodes
            .iter()
            .filter(move |n| n.map.is_some() && Some(n.level) == level)
    }
}

/// Fills one feature map for `points` using an already fitted `frame`.
/// `global_indices[i]` is the level-0 index of `points[i]`.
pub fn represent_in_frame(
    points: &[Vec3],
    global_indices: &[u32],
    frame: &EllipsoidFrame,
    m: usize,
    layout: ChannelLayout,
    mode: AnchorMode,
) -> Result<FeatureMap> {
    if points.len() != global_indices.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            actual: global_indices.len(),
        });
    }
    if m == 0 {
        return Err(Error::Config("resolution must be at least 1".into()));
    }
    let index = NnIndex::build(points)?;
    let c = layout.channels();
    let mut data = Vec::with_capacity(m * m * c);
    let mut point_index = Vec::with_capacity(m * m);
    for v in 0..m {
        for u in 0..m {
            let unit = sphere_anchor(u, v, m, mode)?;
            let hit = index.nearest(anchor_world(frame, unit));
            let p = points[hit.index];
            point_index.push(global_indices[hit.index]);
            if layout.world_position {
                data.extend_from_slice(&p.to_array());
            }
            if layout.local_position {
                data.extend_from_slice(&to_local(frame, p).to_array());
            }
            if layout.sphere_anchor {
                data.extend_from_slice(&unit.to_array());
            }
            if layout.pixel_coords {
                data.push(u as f64 / m as f64);
                data.push(v as f64 / m as f64);
            }
        }
    }
    Ok(FeatureMap {
        m,
        layout,
        data,
        point_index,
    })
}

/// PCA-fitted ellipsoid feature plus its dense feature map.
pub fn represent_single(
    points: &[Vec3],
    global_indices: &[u32],
    m: usize,
    layout: ChannelLayout,
    mode: AnchorMode,
) -> Result<(EllipsoidFeature, FeatureMap)> {
    let frame = pca_frame(points)?;
    let map = represent_in_frame(points, global_indices, &frame, m, layout, mode)?;
    Ok((frame.feature(), map))
}

fn fit(points: &[Vec3], how: FrameFit) -> Result<EllipsoidFrame> {
    match how {
        FrameFit::Pca => pca_frame(points),
        FrameFit::Circumsphere => circumsphere_frame(points),
    }
}

/// Seed for the decomposition of the node at `position`; the root uses the
/// configured seed unchanged.
fn node_seed(seed: u64, position: usize) -> u64 {
    if position == 0 {
        return seed;
    }
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((position as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn map_ordered<T, R, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

struct NodeJob {
    level: u32,
    parent: Option<usize>,
    members: Vec<u32>,
    with_map: bool,
}

fn build_node(cloud: &[Vec3], job: NodeJob, config: &ReprConfig) -> Result<EllipsoidNode> {
    let points: Vec<Vec3> = job.members.iter().map(|&i| cloud[i as usize]).collect();
    let frame = fit(&points, config.frame_fit)?;
    let map = if job.with_map {
        Some(represent_in_frame(
            &points,
            &job.members,
            &frame,
            config.resolution,
            config.layout,
            config.anchor_mode,
        )?)
    } else {
        None
    };
    Ok(EllipsoidNode {
        level: job.level,
        parent: job.parent,
        members: job.members,
        feature: frame.feature(),
        map,
    })
}

fn validate_config(config: &ReprConfig) -> Result<()> {
    if config.levels == 0 {
        return Err(Error::Config("levels must be at least 1".into()));
    }
    if config.resolution == 0 {
        return Err(Error::Config("resolution must be at least 1".into()));
    }
    if config.levels > 1 && config.partitions == 0 {
        return Err(Error::ZeroPartitions);
    }
    if config.layout.channels() == 0 {
        return Err(Error::Config("at least one channel group is required".into()));
    }
    Ok(())
}

/// Builds the multi-level representation: the root covers the whole cloud,
/// and every node above the last level is split by k-means into
/// `config.partitions` children, each with its own ellipsoid and map.
///
/// Output is identical whether or not `config.parallel` is set.
pub fn represent_hierarchical(
    cloud: &[Vec3],
    config: &ReprConfig,
) -> Result<HierarchicalRepresentation> {
    validate_config(config)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    if config.levels > 1 && cloud.len() < config.partitions {
        return Err(Error::CloudTooSmall {
            n: cloud.len(),
            k: config.partitions,
        });
    }
    let deepest = config.levels as u32 - 1;
    let root = build_node(
        cloud,
        NodeJob {
            level: 0,
            parent: None,
            members: (0..cloud.len() as u32).collect(),
            with_map: config.root_map || deepest == 0,
        },
        config,
    )?;
    let mut nodes = vec![root];
    let mut frontier: Vec<usize> = vec![0];

    for level in 1..=deepest {
        let splits = map_ordered(&frontier, config.parallel, |&pos| {
            let parent = &nodes[pos];
            if parent.members.len() < config.partitions {
                return Err(Error::CloudTooSmall {
                    n: parent.members.len(),
                    k: config.partitions,
                });
            }
            let points: Vec<Vec3> = parent.members.iter().map(|&i| cloud[i as usize]).collect();
            let assignment = kmeans_partition(&points, config.partitions, node_seed(config.seed, pos))?;
            let parts = partition_points(&points, &assignment)?;
            Ok(parts
                .into_iter()
                .map(|part| NodeJob {
                    level,
                    parent: Some(pos),
                    members: part.indices.iter().map(|&i| parent.members[i as usize]).collect(),
                    with_map: true,
                })
                .collect::<Vec<_>>())
        })?;
        let jobs: Vec<NodeJob> = splits.into_iter().flatten().collect();
        let first = nodes.len();
        let built = if config.parallel {
            jobs.into_par_iter()
                .map(|job| build_node(cloud, job, config))
                .collect::<Result<Vec<_>>>()?
        } else {
            jobs.into_iter()
                .map(|job| build_node(cloud, job, config))
                .collect::<Result<Vec<_>>>()?
        };
        nodes.extend(built);
        frontier = (first..nodes.len()).collect();
    }

    Ok(HierarchicalRepresentation {
        n_points: cloud.len(),
        levels: config.levels,
        layout: config.layout,
        anchor_mode: config.anchor_mode,
        nodes,
    })
}

/// `true` for every point that fills at least one pixel at the deepest
/// mapped level.
pub fn usage_mask(rep: &HierarchicalRepresentation) -> Vec<bool> {
    let mut used = vec![false; rep.n_points];
    for node in rep.metric_nodes() {
        let map = node.map.as_ref().expect("metric nodes carry maps");
        for &i in &map.point_index {
            used[i as usize] = true;
        }
    }
    used
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(-0.2..0.2)))
            .collect()
    }

    #[test]
    fn layout_widths() {
        assert_eq!(ChannelLayout::LOCAL.channels(), 3);
        assert_eq!(ChannelLayout::FULL.channels(), 11);
        assert_eq!(ChannelLayout::from_flags(ChannelLayout::FULL.flags()).unwrap(), ChannelLayout::FULL);
        assert!(ChannelLayout::from_flags(0).is_err());
        assert!(ChannelLayout::from_flags(0x10).is_err());
        let pix = ChannelLayout::from_flags(8).unwrap();
        assert_eq!(pix.channels(), 2);
        let offs = ChannelLayout::FULL.offsets();
        assert_eq!(offs.pixel_coords, Some(9));
        assert_eq!(ChannelLayout::LOCAL.offsets().local_position, Some(0));
    }

    #[test]
    fn single_point_saturates_the_map() {
        let pts = [Vec3::ZERO];
        let (_, map) = represent_single(&pts, &[0], 4, ChannelLayout::FULL, AnchorMode::Centered).unwrap();
        assert_eq!(map.point_index, vec![0; 16]);
        for v in 0..4 {
            for u in 0..4 {
                assert_eq!(&map.pixel(u, v)[..3], &[0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn channels_follow_layout() {
        let pts = random_cloud(300, 1);
        let ids: Vec<u32> = (0..300).collect();
        let frame = pca_frame(&pts).unwrap();
        let map = represent_in_frame(&pts, &ids, &frame, 8, ChannelLayout::FULL, AnchorMode::Paper).unwrap();
        for v in 0..8 {
            for u in 0..8 {
                let px = map.pixel(u, v);
                let p = pts[map.point_at(u, v) as usize];
                assert_eq!(&px[0..3], &p.to_array());
                assert_eq!(&px[3..6], &to_local(&frame, p).to_array());
                let a = Vec3::new(px[6], px[7], px[8]);
                assert!((a.norm() - 1.0).abs() < 1e-12);
                assert_eq!(&px[9..11], &[u as f64 / 8.0, v as f64 / 8.0]);
            }
        }
    }

    #[test]
    fn one_level_is_represent_single() {
        let pts = random_cloud(200, 2);
        let cfg = ReprConfig {
            levels: 1,
            resolution: 8,
            ..ReprConfig::default()
        };
        let rep = represent_hierarchical(&pts, &cfg).unwrap();
        assert_eq!(rep.nodes.len(), 1);
        let ids: Vec<u32> = (0..200).collect();
        let (feat, map) = represent_single(&pts, &ids, 8, cfg.layout, cfg.anchor_mode).unwrap();
        assert_eq!(rep.nodes[0].feature, feat);
        assert_eq!(rep.nodes[0].map.as_ref().unwrap(), &map);
    }

    #[test]
    fn two_levels_partition_the_cloud() {
        let pts = random_cloud(2048, 3);
        let rep = represent_hierarchical(&pts, &ReprConfig::default()).unwrap();
        assert_eq!(rep.nodes.len(), 37);
        let mut all: Vec<u32> = rep.nodes[1..].iter().flat_map(|n| n.members.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..2048).collect::<Vec<u32>>());
        for n in &rep.nodes[1..] {
            assert_eq!(n.parent, Some(0));
            assert_eq!(n.level, 1);
            let map = n.map.as_ref().unwrap();
            assert_eq!((map.m, map.layout.channels()), (32, 3));
            assert!(map.point_index.iter().all(|i| n.members.binary_search(i).is_ok()));
        }
    }

    #[test]
    fn three_levels_nest() {
        let pts = random_cloud(600, 4);
        let cfg = ReprConfig {
            levels: 3,
            partitions: 4,
            resolution: 4,
            ..ReprConfig::default()
        };
        let rep = represent_hierarchical(&pts, &cfg).unwrap();
        assert_eq!(rep.nodes.len(), 1 + 4 + 16);
        for (pos, node) in rep.nodes.iter().enumerate() {
            let children: Vec<&EllipsoidNode> = rep.nodes.iter().filter(|c| c.parent == Some(pos)).collect();
            if node.level < 2 {
                let mut union: Vec<u32> = children.iter().flat_map(|c| c.members.clone()).collect();
                union.sort_unstable();
                assert_eq!(union, node.members);
            } else {
                assert!(children.is_empty());
            }
            if let Some(p) = node.parent {
                assert!(p < pos);
            }
        }
        assert_eq!(rep.mapped_level(), Some(2));
    }

    #[test]
    fn parallel_matches_sequential() {
        let pts = random_cloud(1000, 5);
        let seq = ReprConfig {
            parallel: false,
            ..ReprConfig::default()
        };
        let par = ReprConfig {
            parallel: true,
            ..ReprConfig::default()
        };
        assert_eq!(
            represent_hierarchical(&pts, &seq).unwrap(),
            represent_hierarchical(&pts, &par).unwrap()
        );
    }

    #[test]
    fn too_small_cloud() {
        let pts = random_cloud(10, 6);
        let err = represent_hierarchical(&pts, &ReprConfig::default()).unwrap_err();
        assert!(matches!(err, Error::CloudTooSmall { n: 10, k: 36 }));
        assert!(err.to_string().contains("cloud too small for partition count"));
    }

    #[test]
    fn usage_of_a_single_point() {
        let cfg = ReprConfig {
            levels: 1,
            resolution: 4,
            ..ReprConfig::default()
        };
        let rep = represent_hierarchical(&[Vec3::new(1.0, 2.0, 3.0)], &cfg).unwrap();
        assert_eq!(usage_mask(&rep), vec![true]);
    }

    #[test]
    fn square_of_four_points_is_fully_used() {
        let pts = [
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(-1.0, 1.0, 0.0),
            Vec3::new(-1.0, -1.0, 0.0),
            Vec3::new(1.0, -1.0, 0.0),
        ];
        let cfg = ReprConfig {
            levels: 1,
            resolution: 32,
            ..ReprConfig::default()
        };
        let rep = represent_hierarchical(&pts, &cfg).unwrap();
        assert_eq!(usage_mask(&rep), vec![true; 4]);
    }

    #[test]
    fn root_map_is_not_counted_when_deeper_maps_exist() {
        let pts = random_cloud(400, 7);
        let cfg = ReprConfig {
            partitions: 4,
            resolution: 4,
            ..ReprConfig::default()
        };
        let rep = represent_hierarchical(&pts, &cfg).unwrap();
        assert!(rep.nodes[0].map.is_some());
        assert_eq!(rep.metric_nodes().count(), 4);
        let dropped = represent_hierarchical(&pts, &ReprConfig { root_map: false, ..cfg }).unwrap();
        assert!(dropped.nodes[0].map.is_none());
        assert_eq!(usage_mask(&rep), usage_mask(&dropped));
    }
}
