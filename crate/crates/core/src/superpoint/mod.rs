//! Instance-boundary-aware superpoints.
//!
//! The KNN graph over the cloud is pruned wherever the two endpoints of an
//! edge project onto different 2D instances, then clustered by graph-based
//! segmentation with per-component adaptive thresholds.

mod felzenszwalb;
mod forest;
mod graph;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use felzenszwalb::felzenszwalb_segment;
pub use forest::DisjointForest;
pub use graph::{build_boundary_aware_graph, build_geometry_graph};

use crate::error::{Error, Result};
use crate::geometry::{build_knn_index, estimate_normals};
use crate::model::{CorrespondenceTable, InstanceRaster, PointCloud, SuperpointMask};

/// Undirected weighted edge with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub w: f32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    edges: Vec<Edge>,
}

impl EdgeList {
    pub fn new(edges: Vec<Edge>) -> Result<Self> {
        for (k, e) in edges.iter().enumerate() {
            if e.i >= e.j {
                return Err(Error::invalid(format!("edge {k} ({}, {}) must satisfy i < j", e.i, e.j)));
            }
            if !(0.0..=2.0).contains(&e.w) {
                return Err(Error::invalid(format!("edge {k} weight {} outside [0, 2]", e.w)));
            }
        }
        let mut keys: Vec<(u32, u32)> = edges.iter().map(|e| (e.i, e.j)).collect();
        keys.sort_unstable();
        if let Some(d) = keys.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::invalid(format!("duplicate edge ({}, {})", d[0].0, d[0].1)));
        }
        Ok(Self { edges })
    }

    pub(crate) fn from_parts_unchecked(edges: Vec<Edge>) -> Self {
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

/// What to do with KNN edges whose endpoints come from different views.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossViewPolicy {
    /// Drop them: instance ids are local to a view and never comparable.
    #[default]
    Prune,
    /// Compare the raw ids as if they shared one namespace.
    Keep,
}

/// How background (`-1`) pixels take part in the instance test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundPolicy {
    /// `-1` is an ordinary id; two background points may connect.
    #[default]
    Label,
    /// Any background endpoint disconnects the edge.
    Prune,
}

macro_rules! policy_str {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name,)+ })
            }
        }
    };
}

policy_str!(CrossViewPolicy, Prune => "prune", Keep => "keep");
policy_str!(BackgroundPolicy, Label => "label", Prune => "prune");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub sp_thresh: f64,
    pub sp_min: usize,
    pub cross_view_policy: CrossViewPolicy,
    pub background_policy: BackgroundPolicy,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            sp_thresh: 0.1,
            sp_min: 25,
            cross_view_policy: CrossViewPolicy::Prune,
            background_policy: BackgroundPolicy::Label,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sp_thresh.is_finite() && self.sp_thresh > 0.0) {
            return Err(Error::invalid(format!("sp_thresh must be positive, got {}", self.sp_thresh)));
        }
        if self.sp_min < 1 {
            return Err(Error::invalid("sp_min must be at least 1"));
        }
        Ok(())
    }
}

/// Normals, boundary-aware graph and segmentation in one call.
pub fn segment_pipeline(
    points: &PointCloud,
    corr: &CorrespondenceTable,
    raster: &InstanceRaster,
    cfg: &SegmentConfig,
    k: usize,
) -> Result<SuperpointMask> {
    cfg.validate()?;
    let index = build_knn_index(points, k)?;
    let normals = estimate_normals(points, &index, None)?;
    let edges = build_boundary_aware_graph(points, &normals, &index, corr, raster, cfg)?;
    felzenszwalb_segment(points.len(), &edges, cfg)
}

/// Segmentation from the unpruned KNN graph, ignoring every 2D mask.
pub fn segment_geometry_only(points: &PointCloud, cfg: &SegmentConfig, k: usize) -> Result<SuperpointMask> {
    cfg.validate()?;
    let index = build_knn_index(points, k)?;
    let normals = estimate_normals(points, &index, None)?;
    let edges = build_geometry_graph(&normals, &index)?;
    felzenszwalb_segment(points.len(), &edges, cfg)
}
