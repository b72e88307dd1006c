use rayon::prelude::*;

use super::{DisjointForest, Edge, EdgeList, SegmentConfig};
use crate::error::{Error, Result};
use crate::model::SuperpointMask;

/// Edges in processing order: ascending weight, then ascending `(i, j)`.
pub(crate) fn sorted_edges(edges: &EdgeList) -> Vec<Edge> {
    let mut sorted = edges.edges().to_vec();
    sorted.par_sort_unstable_by(|a, b| a.w.total_cmp(&b.w).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j)));
    sorted
}

/// Graph-based segmentation of `point_count` nodes.
///
/// Pass one merges two components when the edge weight is within both
/// roots' adaptive thresholds, then resets the merged root's threshold to
/// `w + sp_thresh / size`. Pass two walks the same order and joins any two
/// components where either side is smaller than `sp_min`. Labels are
/// numbered by first appearance in point order.
pub fn felzenszwalb_segment(point_count: usize, edges: &EdgeList, cfg: &SegmentConfig) -> Result<SuperpointMask> {
    cfg.validate()?;
    if u32::try_from(point_count).is_err() {
        return Err(Error::invalid(format!("{point_count} points exceed the u32 index range")));
    }
    if let Some(e) = edges.edges().iter().find(|e| e.j as usize >= point_count) {
        return Err(Error::invalid(format!(
            "edge ({}, {}) references a point beyond N = {point_count}",
            e.i, e.j
        )));
    }
    let sorted = sorted_edges(edges);
    let mut forest = DisjointForest::new(point_count, cfg.sp_thresh);

    for e in &sorted {
        let ri = forest.find(e.i as usize);
        let rj = forest.find(e.j as usize);
        let w = e.w as f64;
        if ri != rj && w <= forest.threshold(ri) && w <= forest.threshold(rj) {
            let root = forest.union_roots(ri, rj);
            let t = w + cfg.sp_thresh / forest.size(root) as f64;
            forest.set_threshold(root, t);
        }
    }

    for e in &sorted {
        let ri = forest.find(e.i as usize);
        let rj = forest.find(e.j as usize);
        if ri != rj && (forest.size(ri) < cfg.sp_min || forest.size(rj) < cfg.sp_min) {
            forest.union_roots(ri, rj);
        }
    }

    let roots: Vec<u32> = (0..point_count).map(|i| forest.find(i) as u32).collect();
    Ok(SuperpointMask::from_first_appearance(&roots))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> EdgeList {
        EdgeList::new(vec![
            Edge { i: 0, j: 1, w: 0.01 },
            Edge { i: 1, j: 2, w: 0.01 },
            Edge { i: 2, j: 3, w: 1.5 },
        ])
        .unwrap()
    }

    fn cfg(sp_thresh: f64, sp_min: usize) -> SegmentConfig {
        SegmentConfig { sp_thresh, sp_min, ..SegmentConfig::default() }
    }

    #[test]
    fn hand_trace_without_small_segment_pass() {
        let sp = felzenszwalb_segment(4, &chain(), &cfg(0.1, 1)).unwrap();
        assert_eq!(sp.labels(), &[0, 0, 0, 1]);
    }

    #[test]
    fn hand_trace_with_force_merge() {
        let sp = felzenszwalb_segment(4, &chain(), &cfg(0.1, 2)).unwrap();
        assert_eq!(sp.labels(), &[0, 0, 0, 0]);
    }

    #[test]
    fn no_edges_gives_singletons() {
        let sp = felzenszwalb_segment(5, &EdgeList::default(), &cfg(0.1, 3)).unwrap();
        assert_eq!(sp.labels(), &[0, 1, 2, 3, 4]);
        assert_eq!(sp.superpoint_count(), 5);
    }

    #[test]
    fn adaptive_threshold_blocks_after_growth() {
        // After {0,1} merges at w = 0 its threshold drops to 0.05, so an edge
        // of weight 0.08 into it is refused even though 0.08 <= sp_thresh.
        let edges = EdgeList::new(vec![Edge { i: 0, j: 1, w: 0.0 }, Edge { i: 1, j: 2, w: 0.08 }]).unwrap();
        let sp = felzenszwalb_segment(3, &edges, &cfg(0.1, 1)).unwrap();
        assert_eq!(sp.labels(), &[0, 0, 1]);
    }

    #[test]
    fn rejects_out_of_range_edges() {
        let edges = EdgeList::new(vec![Edge { i: 0, j: 9, w: 0.0 }]).unwrap();
        assert!(felzenszwalb_segment(3, &edges, &cfg(0.1, 1)).is_err());
    }
}
