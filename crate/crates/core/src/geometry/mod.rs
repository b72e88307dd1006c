//! Spatial kernel: exact k-nearest neighbors and PCA normals.

mod kdtree;
mod normals;

pub use kdtree::{build_knn_index, KdTree, KnnIndex};
pub use normals::{estimate_normals, NormalField, FALLBACK_NORMAL};

/// Neighbor count used for normals and graph construction unless configured.
pub const DEFAULT_K: usize = 16;
