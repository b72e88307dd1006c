use rayon::prelude::*;

use super::{BackgroundPolicy, CrossViewPolicy, Edge, EdgeList, SegmentConfig};
use crate::error::{Error, Result};
use crate::geometry::{KnnIndex, NormalField};
use crate::model::{CorrespondenceTable, InstanceRaster, PointCloud, BACKGROUND};

#[inline]
fn normal_weight(a: [f32; 3], b: [f32; 3]) -> f32 {
    let dot = a[0] as f64 * b[0] as f64 + a[1] as f64 * b[1] as f64 + a[2] as f64 * b[2] as f64;
    (1.0 - dot).clamp(0.0, 2.0) as f32
}

/// Weighted KNN edges, deduplicated and sorted by `(i, j)`, keeping only the
/// candidate pairs accepted by `keep`.
fn collect_edges<F>(normals: &NormalField, index: &KnnIndex, keep: F) -> Vec<Edge>
where
    F: Fn(usize, usize) -> bool + Sync,
{
    let mut edges: Vec<Edge> = (0..normals.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let keep = &keep;
            index.neighbors(i).iter().filter_map(move |&j| {
                let j = j as usize;
                if !keep(i, j) {
                    return None;
                }
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                Some(Edge {
                    i: lo as u32,
                    j: hi as u32,
                    w: normal_weight(normals.get(lo), normals.get(hi)),
                })
            })
        })
        .collect();
    // Both orientations of a pair carry bit-identical weights.
    edges.par_sort_unstable_by_key(|e| (e.i, e.j));
    edges.dedup_by_key(|e| (e.i, e.j));
    edges
}

/// The unpruned KNN graph with normal-difference weights.
pub fn build_geometry_graph(normals: &NormalField, index: &KnnIndex) -> Result<EdgeList> {
    if index.point_count() != normals.len() {
        return Err(Error::invalid(format!(
            "{} normals for an index over {} points",
            normals.len(),
            index.point_count()
        )));
    }
    Ok(EdgeList::from_parts_unchecked(collect_edges(normals, index, |_, _| true)))
}

/// KNN graph with every edge removed whose endpoints fall on different 2D
/// instances of the raster, at the nearest pixel of each endpoint.
pub fn build_boundary_aware_graph(
    points: &PointCloud,
    normals: &NormalField,
    index: &KnnIndex,
    corr: &CorrespondenceTable,
    raster: &InstanceRaster,
    cfg: &SegmentConfig,
) -> Result<EdgeList> {
    let n = points.len();
    if normals.len() != n || index.point_count() != n || corr.len() != n {
        return Err(Error::invalid(format!(
            "inconsistent point counts: cloud {n}, normals {}, index {}, correspondences {}",
            normals.len(),
            index.point_count(),
            corr.len()
        )));
    }
    raster.check_matches(corr)?;
    let mut views = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let (v, row, col) = corr.pixel_of(i);
        let id = raster.get(v as usize, row as usize, col as usize).ok_or_else(|| {
            Error::invalid(format!("point {i} maps to pixel ({v}, {row}, {col}) outside the raster"))
        })?;
        views.push(v);
        ids.push(id);
    }
    let keep = |i: usize, j: usize| {
        if views[i] != views[j] && cfg.cross_view_policy == CrossViewPolicy::Prune {
            return false;
        }
        if cfg.background_policy == BackgroundPolicy::Prune && (ids[i] == BACKGROUND || ids[j] == BACKGROUND) {
            return false;
        }
        ids[i] == ids[j]
    };
    Ok(EdgeList::from_parts_unchecked(collect_edges(normals, index, keep)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_knn_index;
    use crate::model::{Correspondence, ViewDims};

    fn pair_setup(normals: Vec<[f32; 3]>, ids: [i32; 2]) -> EdgeList {
        let cloud = PointCloud::new(vec![[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]]).unwrap();
        let index = build_knn_index(&cloud, 1).unwrap();
        let normals = NormalField::new(normals).unwrap();
        let corr = CorrespondenceTable::new(
            vec![Correspondence { view: 0, x: 0.0, y: 0.0 }, Correspondence { view: 0, x: 1.0, y: 0.0 }],
            vec![ViewDims::new(1, 2)],
        )
        .unwrap();
        let (raster, _) = InstanceRaster::relabeled(1, 1, 2, ids.to_vec()).unwrap();
        build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &SegmentConfig::default()).unwrap()
    }

    #[test]
    fn same_instance_identical_normals_weight_zero() {
        let e = pair_setup(vec![[0.0, 0.0, 1.0]; 2], [0, 0]);
        assert_eq!(e.edges(), &[Edge { i: 0, j: 1, w: 0.0 }]);
    }

    #[test]
    fn different_instances_disconnect() {
        let e = pair_setup(vec![[0.0, 0.0, 1.0]; 2], [3, 7]);
        assert!(e.is_empty());
    }

    #[test]
    fn orthogonal_normals_weight_one() {
        let e = pair_setup(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]], [0, 0]);
        assert_eq!(e.edges(), &[Edge { i: 0, j: 1, w: 1.0 }]);
    }

    #[test]
    fn background_policies() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.01, 0.0, 0.0]]).unwrap();
        let index = build_knn_index(&cloud, 1).unwrap();
        let normals = NormalField::new(vec![[0.0, 0.0, 1.0]; 2]).unwrap();
        let corr = CorrespondenceTable::new(
            vec![Correspondence { view: 0, x: 0.0, y: 0.0 }, Correspondence { view: 0, x: 1.0, y: 0.0 }],
            vec![ViewDims::new(1, 2)],
        )
        .unwrap();
        let raster = InstanceRaster::new(1, 1, 2, vec![-1, -1]).unwrap();
        let mut cfg = SegmentConfig::default();
        let labelled = build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &cfg).unwrap();
        assert_eq!(labelled.len(), 1);
        cfg.background_policy = BackgroundPolicy::Prune;
        let pruned = build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &cfg).unwrap();
        assert!(pruned.is_empty());
    }

    #[test]
    fn cross_view_policies() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.01, 0.0, 0.0]]).unwrap();
        let index = build_knn_index(&cloud, 1).unwrap();
        let normals = NormalField::new(vec![[0.0, 0.0, 1.0]; 2]).unwrap();
        let corr = CorrespondenceTable::new(
            vec![Correspondence { view: 0, x: 0.0, y: 0.0 }, Correspondence { view: 1, x: 0.0, y: 0.0 }],
            vec![ViewDims::new(1, 1); 2],
        )
        .unwrap();
        let raster = InstanceRaster::new(2, 1, 1, vec![0, 0]).unwrap();
        let mut cfg = SegmentConfig::default();
        assert!(build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &cfg)
            .unwrap()
            .is_empty());
        cfg.cross_view_policy = CrossViewPolicy::Keep;
        assert_eq!(
            build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &cfg).unwrap().len(),
            1
        );
    }

    #[test]
    fn raster_dimension_mismatch_is_rejected() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.01, 0.0, 0.0]]).unwrap();
        let index = build_knn_index(&cloud, 1).unwrap();
        let normals = NormalField::new(vec![[0.0, 0.0, 1.0]; 2]).unwrap();
        let corr = CorrespondenceTable::new(
            vec![Correspondence { view: 0, x: 0.0, y: 0.0 }, Correspondence { view: 0, x: 1.0, y: 1.0 }],
            vec![ViewDims::new(4, 4)],
        )
        .unwrap();
        let raster = InstanceRaster::new(1, 2, 2, vec![0; 4]).unwrap();
        let cfg = SegmentConfig::default();
        assert!(build_boundary_aware_graph(&cloud, &normals, &index, &corr, &raster, &cfg).is_err());
    }
}
