//! Hierarchical ellipsoid representations of 3D point clouds.
//!
//! A cloud is fitted with a PCA-oriented ellipsoid whose surface is sampled
//! on an `M × M` latitude/longitude grid. Each grid pixel takes the features
//! of the cloud point nearest to its surface anchor, which yields a dense 2D
//! feature map plus a nine-value ellipsoid descriptor. K-means splits the
//! cloud into partitions that are represented the same way, one level down.
//!
//! The [`metrics`] module maps per-pixel labels back onto points and measures
//! how much of the cloud a representation keeps.

pub mod cloud;
pub mod decomposition;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod representation;
pub mod spatial;
pub mod synthetic;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geometry::{AnchorMode, EllipsoidFeature, EllipsoidFrame, Rotation3, Vec3};
pub use representation::{
    represent_hierarchical, ChannelLayout, FeatureMap, FrameFit, HierarchicalRepresentation,
    ReprConfig,
};
