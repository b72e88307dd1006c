//! View-wise instance partition.
//!
//! Scene-level predictions are split into per-view predictions so that
//! annotations lifted from a single view only ever supervise the queries and
//! superpoints that view actually reconstructed.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_init_superpoints, CorrespondenceTable, FeatureMatrix, ScenePrediction, SuperpointMask};

/// View-belonging masks for points, superpoints and queries.
///
/// Point visibility is kept in its sparse form (one view per point); the
/// dense `V x N` matrix is never built, but single rows can be expanded with
/// [`VisibilityMasks::point_row`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMasks {
    views: usize,
    point_view: Vec<u32>,
    superpoint_count: usize,
    superpoint_vis: Vec<bool>,
    query_vis: Vec<bool>,
    query_count: usize,
}

impl VisibilityMasks {
    pub fn view_count(&self) -> usize {
        self.views
    }

    pub fn point_count(&self) -> usize {
        self.point_view.len()
    }

    pub fn superpoint_count(&self) -> usize {
        self.superpoint_count
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    #[inline]
    pub fn point(&self, view: usize, point: usize) -> bool {
        self.point_view[point] as usize == view
    }

    pub fn point_row(&self, view: usize) -> Vec<bool> {
        self.point_view.iter().map(|&v| v as usize == view).collect()
    }

    #[inline]
    pub fn superpoint(&self, view: usize, sp: usize) -> bool {
        self.superpoint_vis[view * self.superpoint_count + sp]
    }

    pub fn superpoint_row(&self, view: usize) -> &[bool] {
        &self.superpoint_vis[view * self.superpoint_count..(view + 1) * self.superpoint_count]
    }

    #[inline]
    pub fn query(&self, view: usize, query: usize) -> bool {
        self.query_vis[view * self.query_count + query]
    }

    pub fn query_row(&self, view: usize) -> &[bool] {
        &self.query_vis[view * self.query_count..(view + 1) * self.query_count]
    }
}

/// A superpoint is visible in a view iff at least one of its points was
/// reconstructed from it; a query inherits its initializing superpoint's
/// visibility.
pub fn compute_visibility(
    corr: &CorrespondenceTable,
    sp: &SuperpointMask,
    init_superpoints: &[u32],
) -> Result<VisibilityMasks> {
    if corr.len() != sp.point_count() {
        return Err(Error::invalid(format!(
            "correspondence table has {} points but superpoint mask has {}",
            corr.len(),
            sp.point_count()
        )));
    }
    let n = sp.superpoint_count();
    check_init_superpoints(init_superpoints, n)?;
    let views = corr.view_count();
    let mut superpoint_vis = vec![false; views * n];
    let mut point_view = Vec::with_capacity(corr.len());
    for (i, e) in corr.entries().iter().enumerate() {
        superpoint_vis[e.view as usize * n + sp.label(i)] = true;
        point_view.push(e.view);
    }
    let q = init_superpoints.len();
    let mut query_vis = Vec::with_capacity(views * q);
    for v in 0..views {
        query_vis.extend(init_superpoints.iter().map(|&s| superpoint_vis[v * n + s as usize]));
    }
    Ok(VisibilityMasks {
        views,
        point_view,
        superpoint_count: n,
        superpoint_vis,
        query_vis,
        query_count: q,
    })
}

/// The slice of the scene prediction that belongs to one view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewPartition {
    pub view_index: u32,
    pub query_rows: Vec<u32>,
    pub superpoint_cols: Vec<u32>,
    /// Row-major `query_rows.len() x superpoint_cols.len()`.
    pub masks: Vec<bool>,
    pub classes: Vec<i32>,
}

impl ViewPartition {
    #[inline]
    pub fn mask(&self, row: usize, col: usize) -> bool {
        self.masks[row * self.superpoint_cols.len() + col]
    }

    /// The per-view slice as a prediction over the view's own superpoints;
    /// initializing superpoints are re-indexed into `superpoint_cols`.
    pub fn to_prediction(&self, scene: &ScenePrediction) -> Result<ScenePrediction> {
        let init = self
            .query_rows
            .iter()
            .map(|&a| {
                let s = scene.init_superpoints()[a as usize];
                self.superpoint_cols
                    .binary_search(&s)
                    .map(|p| p as u32)
                    .map_err(|_| Error::Invariant(format!("query {a} listed in view {} without its superpoint", self.view_index)))
            })
            .collect::<Result<Vec<_>>>()?;
        ScenePrediction::new(self.superpoint_cols.len(), self.masks.clone(), self.classes.clone(), init)
    }
}

/// Selects, for each view, the rows of queries visible in it and the
/// columns of superpoints visible in it. Views without queries still get an
/// (empty) record.
pub fn partition_predictions(pred: &ScenePrediction, vis: &VisibilityMasks) -> Result<Vec<ViewPartition>> {
    if pred.superpoint_count() != vis.superpoint_count() || pred.query_count() != vis.query_count() {
        return Err(Error::invalid(format!(
            "prediction is {}x{} but visibility covers {} queries and {} superpoints",
            pred.query_count(),
            pred.superpoint_count(),
            vis.query_count(),
            vis.superpoint_count()
        )));
    }
    let parts = (0..vis.view_count())
        .map(|v| {
            let rows: Vec<u32> = (0..pred.query_count()).filter(|&a| vis.query(v, a)).map(|a| a as u32).collect();
            let cols: Vec<u32> = (0..pred.superpoint_count())
                .filter(|&k| vis.superpoint(v, k))
                .map(|k| k as u32)
                .collect();
            let mut masks = Vec::with_capacity(rows.len() * cols.len());
            for &a in &rows {
                let scene_row = pred.mask_row(a as usize);
                masks.extend(cols.iter().map(|&k| scene_row[k as usize]));
            }
            let classes = rows.iter().map(|&a| pred.classes()[a as usize]).collect();
            ViewPartition { view_index: v as u32, query_rows: rows, superpoint_cols: cols, masks, classes }
        })
        .collect();
    Ok(parts)
}

/// Left-to-right dot product accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        acc += x as f64 * y as f64;
    }
    acc
}

/// Masks from thresholded query/superpoint similarity; classes from the
/// arg-max query/text similarity (lowest index on ties).
pub fn decode_predictions(
    queries: &FeatureMatrix,
    sp_features: &FeatureMatrix,
    text: &FeatureMatrix,
    tau: f64,
    init_superpoints: &[u32],
) -> Result<ScenePrediction> {
    let c = queries.cols();
    if sp_features.cols() != c || text.cols() != c {
        return Err(Error::invalid(format!(
            "feature widths differ: queries {c}, superpoints {}, text {}",
            sp_features.cols(),
            text.cols()
        )));
    }
    if text.rows() == 0 {
        return Err(Error::invalid("at least one text feature row is required"));
    }
    if init_superpoints.len() != queries.rows() {
        return Err(Error::invalid(format!(
            "{} queries but {} initializing superpoints",
            queries.rows(),
            init_superpoints.len()
        )));
    }
    if !tau.is_finite() {
        return Err(Error::invalid("tau must be finite"));
    }
    let (q, n) = (queries.rows(), sp_features.rows());
    let mut masks = Vec::with_capacity(q * n);
    let mut classes = Vec::with_capacity(q);
    for a in 0..q {
        let qa = queries.row(a);
        masks.extend((0..n).map(|k| dot(qa, sp_features.row(k)) > tau));
        let mut best = (0usize, f64::NEG_INFINITY);
        for t in 0..text.rows() {
            let s = dot(qa, text.row(t));
            if s > best.1 {
                best = (t, s);
            }
        }
        classes.push(best.0 as i32);
    }
    ScenePrediction::new(n, masks, classes, init_superpoints.to_vec())
}

/// `q` distinct superpoints drawn from `0..n` by a seeded generator, in
/// ascending order.
pub fn sample_init_superpoints(superpoint_count: usize, q: usize, seed: u64) -> Result<Vec<u32>> {
    if q > superpoint_count {
        return Err(Error::invalid(format!("cannot select {q} queries from {superpoint_count} superpoints")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<u32> = sample(&mut rng, superpoint_count, q).into_iter().map(|k| k as u32).collect();
    init.sort_unstable();
    Ok(init)
}

/// `feasible[a][g]`: query `a` may be matched to annotation `g` only if its
/// initializing superpoint lies inside that annotation's mask.
///
/// `gt_masks` is row-major `G x n`; the result is row-major `q x G`.
pub fn match_feasibility(gt_masks: &[bool], superpoint_count: usize, init_superpoints: &[u32]) -> Result<Vec<bool>> {
    if superpoint_count == 0 {
        if !gt_masks.is_empty() || !init_superpoints.is_empty() {
            return Err(Error::invalid("masks over zero superpoints must be empty"));
        }
        return Ok(Vec::new());
    }
    if gt_masks.len() % superpoint_count != 0 {
        return Err(Error::invalid(format!(
            "{} mask cells is not a multiple of n = {superpoint_count}",
            gt_masks.len()
        )));
    }
    check_init_superpoints(init_superpoints, superpoint_count)?;
    let g = gt_masks.len() / superpoint_count;
    let mut out = Vec::with_capacity(init_superpoints.len() * g);
    for &s in init_superpoints {
        out.extend((0..g).map(|gi| gt_masks[gi * superpoint_count + s as usize]));
    }
    Ok(out)
}
