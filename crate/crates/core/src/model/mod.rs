//! Domain types shared across the toolkit.
//!
//! Every type validates its invariants on construction and is immutable
//! afterwards. Binary encodings live in [`codec`] and [`ply`].

pub mod codec;
pub mod ply;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N points in an arbitrary world frame, in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f32; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f32; 3]] {
        &self.positions
    }

    #[inline]
    pub fn point(&self, i: usize) -> [f32; 3] {
        self.positions[i]
    }
}

/// Where a single 3D point was reconstructed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub view: u32,
    /// Normalized column coordinate in `[0, 1]`.
    pub x: f32,
    /// Normalized row coordinate in `[0, 1]`.
    pub y: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewDims {
    pub height: u32,
    pub width: u32,
}

impl ViewDims {
    pub fn new(height: u32, width: u32) -> Self {
        Self { height, width }
    }

    /// Nearest pixel `(row, col)` for normalized coordinates, using the
    /// align-corners convention: `x = 0` is column 0, `x = 1` is column `W - 1`.
    #[inline]
    pub fn nearest_pixel(&self, x: f32, y: f32) -> (u32, u32) {
        let col = (x as f64 * (self.width.saturating_sub(1)) as f64).round();
        let row = (y as f64 * (self.height.saturating_sub(1)) as f64).round();
        (row as u32, col as u32)
    }
}

/// Bidirectional point ↔ (view, pixel) map. The forward direction is the
/// stored per-point array; the inverse is obtained by grouping on view.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceTable {
    entries: Vec<Correspondence>,
    view_dims: Vec<ViewDims>,
}

impl CorrespondenceTable {
    pub fn new(entries: Vec<Correspondence>, view_dims: Vec<ViewDims>) -> Result<Self> {
        let views = view_dims.len();
        for (i, e) in entries.iter().enumerate() {
            if e.view as usize >= views {
                return Err(Error::invalid(format!(
                    "point {i} references view {} but only {views} views exist",
                    e.view
                )));
            }
            if !valid_unit(e.x) || !valid_unit(e.y) {
                return Err(Error::invalid(format!(
                    "point {i} has normalized coordinates ({}, {}) outside [0, 1]",
                    e.x, e.y
                )));
            }
        }
        Ok(Self { entries, view_dims })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn view_count(&self) -> usize {
        self.view_dims.len()
    }

    pub fn view_dims(&self) -> &[ViewDims] {
        &self.view_dims
    }

    pub fn entries(&self) -> &[Correspondence] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, point: usize) -> Correspondence {
        self.entries[point]
    }

    /// Nearest pixel `(view, row, col)` a point was reconstructed from.
    #[inline]
    pub fn pixel_of(&self, point: usize) -> (u32, u32, u32) {
        let e = self.entries[point];
        let (row, col) = self.view_dims[e.view as usize].nearest_pixel(e.x, e.y);
        (e.view, row, col)
    }

    /// Inverse map: for each view, the ascending point indices reconstructed from it.
    pub fn points_by_view(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.view_count()];
        for (i, e) in self.entries.iter().enumerate() {
            out[e.view as usize].push(i as u32);
        }
        out
    }
}

fn valid_unit(v: f32) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

/// Per-view integer rasters of 2D instance ids; `-1` is background.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceRaster {
    views: usize,
    height: usize,
    width: usize,
    labels: Vec<i32>,
}

pub const BACKGROUND: i32 = -1;

impl InstanceRaster {
    /// Strict constructor: ids in every view must already be contiguous from 0.
    pub fn new(views: usize, height: usize, width: usize, labels: Vec<i32>) -> Result<Self> {
        check_raster_len(views, height, width, labels.len())?;
        for v in 0..views {
            let plane = &labels[v * height * width..(v + 1) * height * width];
            if let Some(bad) = plane.iter().find(|&&l| l < BACKGROUND) {
                return Err(Error::invalid(format!("view {v} contains invalid label {bad}")));
            }
            if needs_relabel(plane) {
                return Err(Error::invalid(format!("instance ids in view {v} are not contiguous from 0")));
            }
        }
        Ok(Self { views, height, width, labels })
    }

    /// Lenient constructor: ids in each view are compacted to `0..k` keeping
    /// their relative order. The flag reports whether anything was rewritten.
    pub fn relabeled(views: usize, height: usize, width: usize, mut labels: Vec<i32>) -> Result<(Self, bool)> {
        check_raster_len(views, height, width, labels.len())?;
        let mut changed = false;
        let plane_len = height * width;
        for v in 0..views {
            let plane = &mut labels[v * plane_len..(v + 1) * plane_len];
            if let Some(bad) = plane.iter().find(|&&l| l < BACKGROUND) {
                return Err(Error::invalid(format!("view {v} contains invalid label {bad}")));
            }
            if needs_relabel(plane) {
                compact_ids(plane);
                changed = true;
            }
        }
        Ok((Self { views, height, width, labels }, changed))
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> ViewDims {
        ViewDims::new(self.height as u32, self.width as u32)
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn view(&self, v: usize) -> &[i32] {
        let n = self.height * self.width;
        &self.labels[v * n..(v + 1) * n]
    }

    /// Label at a pixel, or `None` when out of bounds.
    #[inline]
    pub fn get(&self, view: usize, row: usize, col: usize) -> Option<i32> {
        if view >= self.views || row >= self.height || col >= self.width {
            return None;
        }
        Some(self.labels[(view * self.height + row) * self.width + col])
    }

    /// Checks that every view of `corr` has this raster's dimensions.
    pub fn check_matches(&self, corr: &CorrespondenceTable) -> Result<()> {
        if corr.view_count() != self.views {
            return Err(Error::invalid(format!(
                "raster has {} views but correspondence table has {}",
                self.views,
                corr.view_count()
            )));
        }
        let dims = self.dims();
        if let Some((v, d)) = corr.view_dims().iter().enumerate().find(|(_, d)| **d != dims) {
            return Err(Error::invalid(format!(
                "view {v} is {}x{} in the correspondence table but {}x{} in the raster",
                d.height, d.width, dims.height, dims.width
            )));
        }
        Ok(())
    }
}

fn check_raster_len(views: usize, height: usize, width: usize, len: usize) -> Result<()> {
    let expected = views
        .checked_mul(height)
        .and_then(|x| x.checked_mul(width))
        .ok_or_else(|| Error::invalid("raster dimensions overflow"))?;
    if expected != len {
        return Err(Error::invalid(format!(
            "raster {views}x{height}x{width} needs {expected} labels, got {len}"
        )));
    }
    Ok(())
}

fn needs_relabel(plane: &[i32]) -> bool {
    let max = plane.iter().copied().max().unwrap_or(BACKGROUND);
    if max < 0 {
        return false;
    }
    let mut seen = vec![false; max as usize + 1];
    for &l in plane {
        if l >= 0 {
            seen[l as usize] = true;
        }
    }
    seen.iter().any(|s| !s)
}

fn compact_ids(plane: &mut [i32]) {
    let mut ids: Vec<i32> = plane.iter().copied().filter(|&l| l >= 0).collect();
    ids.sort_unstable();
    ids.dedup();
    for l in plane.iter_mut() {
        if *l >= 0 {
            *l = ids.binary_search(l).expect("id collected above") as i32;
        }
    }
}

/// Dense row-major matrix of finite `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::invalid("matrix dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, column {}",
                k / cols.max(1),
                k % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }
}

/// Stack of per-view image feature maps, `V x h x w x C`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFeatureStack {
    views: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageFeatureStack {
    pub fn new(views: usize, height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = [height, width, channels]
            .iter()
            .try_fold(views, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("feature stack dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "{views}x{height}x{width}x{channels} stack needs {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature stack contains a non-finite value"));
        }
        Ok(Self { views, height, width, channels, data })
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Channel vector at `(view, row, col)`.
    #[inline]
    pub fn texel(&self, view: usize, row: usize, col: usize) -> &[f32] {
        let start = ((view * self.height + row) * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Partition of N points into n superpoints.
///
/// Stored as per-point labels; the boolean `n x N` membership matrix is
/// available through [`SuperpointMask::contains`] and [`SuperpointMask::members`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpointMask {
    labels: Vec<u32>,
    count: usize,
}

impl SuperpointMask {
    /// Strict constructor: labels must lie in `0..count` and use every value.
    pub fn new(labels: Vec<u32>, count: usize) -> Result<Self> {
        let mut used = vec![false; count];
        for (i, &l) in labels.iter().enumerate() {
            match used.get_mut(l as usize) {
                Some(u) => *u = true,
                None => {
                    return Err(Error::invalid(format!(
                        "point {i} has label {l} but only {count} superpoints exist"
                    )))
                }
            }
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!("labels not contiguous: superpoint {missing} is empty")));
        }
        Ok(Self { labels, count })
    }

    /// Compacts arbitrary labels to `0..n`, preserving their relative order.
    pub fn compacted(labels: &[u32]) -> Self {
        let mut ids = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let labels = labels
            .iter()
            .map(|l| ids.binary_search(l).expect("present") as u32)
            .collect();
        Self { labels, count: ids.len() }
    }

    /// Relabels so that superpoints are numbered in order of first
    /// appearance by point index. Input labels may be any `u32` values.
    pub fn from_first_appearance(raw: &[u32]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                let next = map.len() as u32;
                *map.entry(r).or_insert(next)
            })
            .collect();
        Self { labels, count: map.len() }
    }

    pub(crate) fn from_parts_unchecked(labels: Vec<u32>, count: usize) -> Self {
        Self { labels, count }
    }

    pub fn point_count(&self) -> usize {
        self.labels.len()
    }

    pub fn superpoint_count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, point: usize) -> usize {
        self.labels[point] as usize
    }

    /// Entry `(superpoint, point)` of the boolean membership matrix.
    #[inline]
    pub fn contains(&self, superpoint: usize, point: usize) -> bool {
        self.labels[point] as usize == superpoint
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Point indices of every superpoint, ascending.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i as u32);
        }
        out
    }
}

/// Scene-level decoded predictions: one boolean mask over superpoints, a
/// class index and an initializing superpoint per query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenePrediction {
    superpoint_count: usize,
    masks: Vec<bool>,
    classes: Vec<i32>,
    init_superpoints: Vec<u32>,
}

impl ScenePrediction {
    pub fn new(superpoint_count: usize, masks: Vec<bool>, classes: Vec<i32>, init_superpoints: Vec<u32>) -> Result<Self> {
        let q = classes.len();
        if init_superpoints.len() != q {
            return Err(Error::invalid(format!(
                "{q} classes but {} initializing superpoints",
                init_superpoints.len()
            )));
        }
        if masks.len() != q * superpoint_count {
            return Err(Error::invalid(format!(
                "{q}x{superpoint_count} masks need {} cells, got {}",
                q * superpoint_count,
                masks.len()
            )));
        }
        if let Some(c) = classes.iter().find(|&&c| c < 0) {
            return Err(Error::invalid(format!("negative class index {c}")));
        }
        check_init_superpoints(&init_superpoints, superpoint_count)?;
        Ok(Self { superpoint_count, masks, classes, init_superpoints })
    }

    pub fn query_count(&self) -> usize {
        self.classes.len()
    }

    pub fn superpoint_count(&self) -> usize {
        self.superpoint_count
    }

    pub fn masks(&self) -> &[bool] {
        &self.masks
    }

    #[inline]
    pub fn mask(&self, query: usize, superpoint: usize) -> bool {
        self.masks[query * self.superpoint_count + superpoint]
    }

    pub fn mask_row(&self, query: usize) -> &[bool] {
        &self.masks[query * self.superpoint_count..(query + 1) * self.superpoint_count]
    }

    pub fn classes(&self) -> &[i32] {
        &self.classes
    }

    pub fn init_superpoints(&self) -> &[u32] {
        &self.init_superpoints
    }
}

/// Checks that selection indices are in range and pairwise distinct.
pub fn check_init_superpoints(init: &[u32], superpoint_count: usize) -> Result<()> {
    let mut seen = vec![false; superpoint_count];
    for (a, &s) in init.iter().enumerate() {
        match seen.get_mut(s as usize) {
            None => {
                return Err(Error::invalid(format!(
                    "query {a} initialized from superpoint {s} but only {superpoint_count} exist"
                )))
            }
            Some(true) => return Err(Error::invalid(format!("superpoint {s} initializes more than one query"))),
            Some(flag) => *flag = true,
        }
    }
    Ok(())
}

/// Lifted 2D instance ids for the points reconstructed from one view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewAnnotation {
    pub view: u32,
    #[serde(rename = "points")]
    pub point_indices: Vec<u32>,
    #[serde(rename = "ids")]
    pub instance_ids: Vec<i32>,
}
