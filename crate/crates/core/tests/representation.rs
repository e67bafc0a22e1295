mod common;

use common::{algorithm_oracle, random_cloud};
use ellipsoid_core::geometry::pca_frame;
use ellipsoid_core::io::dataset::LabeledObject;
use ellipsoid_core::metrics::{max_segmentation_iou, point_usage_rate};
use ellipsoid_core::representation::{represent_single, usage_mask};
use ellipsoid_core::synthetic::synthetic_suite;
use ellipsoid_core::{
    represent_hierarchical, AnchorMode, ChannelLayout, HierarchicalRepresentation, ReprConfig, Vec3,
};
use proptest::prelude::*;

fn flatten(channels: &[[f64; 11]], layout: ChannelLayout) -> Vec<f64> {
    let mut out = Vec::new();
    for c in channels {
        if layout.world_position {
            out.extend_from_slice(&c[0..3]);
        }
        if layout.local_position {
            out.extend_from_slice(&c[3..6]);
        }
        if layout.sphere_anchor {
            out.extend_from_slice(&c[6..9]);
        }
        if layout.pixel_coords {
            out.extend_from_slice(&c[9..11]);
        }
    }
    out
}

#[test]
fn single_map_matches_the_transcription() {
    for (seed, layout) in [(1u64, ChannelLayout::FULL), (2, ChannelLayout::LOCAL)] {
        let pts = random_cloud(512, seed);
        let ids: Vec<u32> = (0..512).collect();
        for (mode, centered) in [(AnchorMode::Centered, true), (AnchorMode::Paper, false)] {
            let (_, map) = represent_single(&pts, &ids, 24, layout, mode).unwrap();
            let frame = pca_frame(&pts).unwrap();
            let oracle = algorithm_oracle(&pts, &ids, frame.rotation.rows, 24, centered);
            assert_eq!(map.point_index, oracle.point_index);
            let want = flatten(&oracle.channels, layout);
            assert_eq!(map.data.len(), want.len());
            for (a, b) in map.data.iter().zip(&want) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

fn config(levels: usize, partitions: usize, m: usize) -> ReprConfig {
    ReprConfig {
        levels,
        partitions,
        resolution: m,
        ..ReprConfig::default()
    }
}

fn check_hierarchy(rep: &HierarchicalRepresentation, config: &ReprConfig) {
    assert_eq!(rep.nodes[0].members.len(), rep.n_points);
    for level in 1..config.levels as u32 {
        let mut seen = vec![0u32; rep.n_points];
        for (pos, node) in rep.nodes.iter().enumerate() {
            if node.level != level {
                continue;
            }
            let parent = &rep.nodes[node.parent.unwrap()];
            assert_eq!(parent.level + 1, level);
            assert!(parent.members.len() >= node.members.len());
            assert!(!node.members.is_empty(), "node {pos} is empty");
            for &i in &node.members {
                seen[i as usize] += 1;
                assert!(parent.members.contains(&i));
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "level {level} is not a partition");
    }
    for node in rep.metric_nodes() {
        let map = node.map.as_ref().unwrap();
        assert_eq!(map.point_index.len(), config.resolution * config.resolution);
        for &i in &map.point_index {
            assert!(node.members.contains(&i));
        }
    }
}

#[test]
fn nodes_partition_their_parents() {
    let pts = random_cloud(1500, 9);
    for (levels, k) in [(1, 0), (2, 6), (3, 3)] {
        let c = config(levels, k, 8);
        let rep = represent_hierarchical(&pts, &c).unwrap();
        assert_eq!(rep.nodes.len(), (0..levels).map(|l| k.pow(l as u32)).sum::<usize>());
        check_hierarchy(&rep, &c);
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let pts = random_cloud(2048, 4);
    let par = represent_hierarchical(&pts, &config(3, 4, 16)).unwrap();
    let seq = represent_hierarchical(&pts, &ReprConfig { parallel: false, ..config(3, 4, 16) }).unwrap();
    assert_eq!(par, seq);
}

#[test]
fn usage_rate_is_a_recount_of_mapped_points() {
    let pts = random_cloud(800, 8);
    let rep = represent_hierarchical(&pts, &config(2, 9, 12)).unwrap();
    let mut distinct: Vec<u32> = rep
        .metric_nodes()
        .flat_map(|n| n.map.as_ref().unwrap().point_index.clone())
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(point_usage_rate(&rep), distinct.len() as f64 / 800.0);
    assert_eq!(usage_mask(&rep).iter().filter(|&&b| b).count(), distinct.len());
}

#[test]
fn finer_maps_reuse_coarser_anchors() {
    // With uncentered anchors, the grid at 2m contains the grid at m, so
    // usage can only grow when the resolution doubles.
    let suite = synthetic_suite(10, 1024, 3);
    for levels in [1, 2] {
        let mut means = Vec::new();
        for m in [4, 8, 16, 32] {
            let c = ReprConfig {
                anchor_mode: AnchorMode::Paper,
                root_map: levels == 1,
                ..config(levels, 9, m)
            };
            let mut usage = Vec::new();
            let mut iou = 0.0;
            for o in &suite {
                let rep = represent_hierarchical(&o.cloud.points, &c).unwrap();
                let mask = usage_mask(&rep);
                usage.push(mask);
                let gt = o.cloud.labels.as_deref().unwrap();
                iou += max_segmentation_iou(&rep, &o.cloud.points, gt, Some(&o.part_classes)).unwrap();
            }
            means.push((usage, iou / suite.len() as f64));
        }
        for w in means.windows(2) {
            for (coarse, fine) in w[0].0.iter().zip(&w[1].0) {
                assert!(coarse.iter().zip(fine).all(|(&a, &b)| !a || b), "level {levels}");
            }
            assert!(w[1].1 >= w[0].1 - 1e-9, "level {levels}: mean IoU {} -> {}", w[0].1, w[1].1);
        }
    }
}

#[test]
fn synthetic_objects_convert() {
    let o: LabeledObject = synthetic_suite(1, 64, 0).remove(0).into();
    assert_eq!(o.cloud.len(), 64);
    assert!(!o.part_classes.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn channels_are_consistent(n in 4usize..300, seed in any::<u64>(), m in 1usize..12) {
        let pts = random_cloud(n, seed);
        let rep = represent_hierarchical(&pts, &ReprConfig {
            layout: ChannelLayout::FULL,
            ..config(1, 0, m)
        }).unwrap();
        let node = &rep.nodes[0];
        let map = node.map.as_ref().unwrap();
        let off = ChannelLayout::FULL.offsets();
        let frame = pca_frame(&pts).unwrap();
        for v in 0..m {
            for u in 0..m {
                let px = map.pixel(u, v);
                let p = pts[map.point_at(u, v) as usize];
                let w = off.world_position.unwrap();
                prop_assert_eq!(&px[w..w + 3], &p.to_array()[..]);
                let l = off.local_position.unwrap();
                let local = ellipsoid_core::geometry::to_local(&frame, p);
                prop_assert_eq!(&px[l..l + 3], &local.to_array()[..]);
                let a = off.sphere_anchor.unwrap();
                prop_assert!((Vec3::new(px[a], px[a + 1], px[a + 2]).norm() - 1.0).abs() < 1e-12);
                let c = off.pixel_coords.unwrap();
                prop_assert_eq!(px[c], u as f64 / m as f64);
                prop_assert_eq!(px[c + 1], v as f64 / m as f64);
            }
        }
    }

    #[test]
    fn hierarchy_is_a_partition(n in 40usize..400, seed in any::<u64>(), k in 1usize..6, levels in 1usize..4) {
        let pts = random_cloud(n, seed);
        let c = config(levels, k, 4);
        match represent_hierarchical(&pts, &c) {
            Ok(rep) => check_hierarchy(&rep, &c),
            // A deep node may end up with fewer points than partitions.
            Err(ellipsoid_core::Error::CloudTooSmall { n, k: want }) => prop_assert!(n < want),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
