//! Slow reference implementations and a randomized comparison harness.
//!
//! Each oracle follows the textbook formulation with plain loops and no
//! shared helpers from the optimized code paths.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{pool_superpoint_features, sample_point_features};
use crate::model::{
    Correspondence, CorrespondenceTable, FeatureMatrix, ImageFeatureStack, ScenePrediction, SuperpointMask, ViewDims,
};
use crate::superpoint::{felzenszwalb_segment, Edge, EdgeList, SegmentConfig};
use crate::vip::{compute_visibility, decode_predictions, partition_predictions, ViewPartition};

/// Naive segmentation: one component id per point, relabeled by a full scan
/// on every merge.
pub fn oracle_felzenszwalb(point_count: usize, edges: &EdgeList, cfg: &SegmentConfig) -> Result<SuperpointMask> {
    cfg.validate()?;
    for e in edges.edges() {
        if e.j as usize >= point_count {
            return Err(Error::invalid(format!("edge ({}, {}) out of range", e.i, e.j)));
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let all = edges.edges();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (all[a], all[b]);
        ea.w.total_cmp(&eb.w).then(ea.i.cmp(&eb.i)).then(ea.j.cmp(&eb.j))
    });

    let mut comp: Vec<usize> = (0..point_count).collect();
    let mut thresh: Vec<f64> = vec![cfg.sp_thresh; point_count];
    let size_of = |comp: &[usize], c: usize| comp.iter().filter(|&&x| x == c).count();
    let merge = |comp: &mut Vec<usize>, a: usize, b: usize| -> usize {
        // The larger component keeps its id; the lower id wins ties.
        let (sa, sb) = (size_of(comp, a), size_of(comp, b));
        let (keep, gone) = if sa > sb || (sa == sb && a < b) { (a, b) } else { (b, a) };
        for x in comp.iter_mut() {
            if *x == gone {
                *x = keep;
            }
        }
        keep
    };

    for &k in &order {
        let e = all[k];
        let (a, b) = (comp[e.i as usize], comp[e.j as usize]);
        let w = e.w as f64;
        if a != b && w <= thresh[a] && w <= thresh[b] {
            let keep = merge(&mut comp, a, b);
            thresh[keep] = w + cfg.sp_thresh / size_of(&comp, keep) as f64;
        }
    }
    for &k in &order {
        let e = all[k];
        let (a, b) = (comp[e.i as usize], comp[e.j as usize]);
        if a != b && (size_of(&comp, a) < cfg.sp_min || size_of(&comp, b) < cfg.sp_min) {
            merge(&mut comp, a, b);
        }
    }

    let mut seen: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(point_count);
    for &c in &comp {
        let label = match seen.iter().position(|&s| s == c) {
            Some(p) => p,
            None => {
                seen.push(c);
                seen.len() - 1
            }
        };
        labels.push(label as u32);
    }
    SuperpointMask::new(labels, seen.len())
}

/// Per superpoint, the mean of its members' features.
pub fn oracle_pool(features: &FeatureMatrix, sp: &SuperpointMask) -> Result<FeatureMatrix> {
    if features.rows() != sp.point_count() {
        return Err(Error::invalid("feature rows and superpoint mask disagree"));
    }
    let mut rows = Vec::with_capacity(sp.superpoint_count());
    for k in 0..sp.superpoint_count() {
        let mut row = Vec::with_capacity(features.cols());
        for c in 0..features.cols() {
            let mut sum = 0f64;
            let mut count = 0usize;
            for i in 0..sp.point_count() {
                if sp.labels()[i] as usize == k {
                    sum += features.get(i, c) as f64;
                    count += 1;
                }
            }
            row.push((sum / count as f64) as f32);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return FeatureMatrix::new(0, features.cols(), Vec::new());
    }
    FeatureMatrix::from_rows(&rows)
}

/// Four-corner weighted sum at `(x (w-1), y (h-1))`.
pub fn oracle_bilinear(stack: &ImageFeatureStack, corr: &CorrespondenceTable) -> Result<FeatureMatrix> {
    if stack.views() != corr.view_count() {
        return Err(Error::invalid("view counts disagree"));
    }
    let (h, w, ch) = (stack.height(), stack.width(), stack.channels());
    let mut data = Vec::with_capacity(corr.len() * ch);
    for i in 0..corr.len() {
        let e = corr.get(i);
        let u = (e.x as f64 * (w - 1) as f64).clamp(0.0, (w - 1) as f64);
        let v = (e.y as f64 * (h - 1) as f64).clamp(0.0, (h - 1) as f64);
        let (c0, r0) = (u.floor() as usize, v.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(w - 1), (r0 + 1).min(h - 1));
        let (a, b) = (u - c0 as f64, v - r0 as f64);
        let at = |r: usize, c: usize, k: usize| stack.data()[((e.view as usize * h + r) * w + c) * ch + k] as f64;
        for k in 0..ch {
            let value = (1.0 - a) * (1.0 - b) * at(r0, c0, k)
                + a * (1.0 - b) * at(r0, c1, k)
                + (1.0 - a) * b * at(r1, c0, k)
                + a * b * at(r1, c1, k);
            data.push(value as f32);
        }
    }
    FeatureMatrix::new(corr.len(), ch, data)
}

/// Dense visibility matrices `(V x N, V x n, V x q)`, the superpoint matrix
/// computed as the boolean product of point visibility and the membership
/// matrix.
pub struct DenseVisibility {
    pub views: usize,
    pub point: Vec<Vec<bool>>,
    pub superpoint: Vec<Vec<bool>>,
    pub query: Vec<Vec<bool>>,
}

pub fn oracle_visibility(
    corr: &CorrespondenceTable,
    sp: &SuperpointMask,
    init_superpoints: &[u32],
) -> Result<DenseVisibility> {
    if corr.len() != sp.point_count() {
        return Err(Error::invalid("correspondence table and superpoint mask disagree"));
    }
    crate::model::check_init_superpoints(init_superpoints, sp.superpoint_count())?;
    let views = corr.view_count();
    let n = sp.superpoint_count();
    let point: Vec<Vec<bool>> = (0..views)
        .map(|v| corr.entries().iter().map(|e| e.view as usize == v).collect())
        .collect();
    let mut superpoint = vec![vec![false; n]; views];
    for v in 0..views {
        for k in 0..n {
            let mut count = 0usize;
            for i in 0..corr.len() {
                if point[v][i] && sp.labels()[i] as usize == k {
                    count += 1;
                }
            }
            superpoint[v][k] = count > 0;
        }
    }
    let query = (0..views)
        .map(|v| init_superpoints.iter().map(|&s| superpoint[v][s as usize]).collect())
        .collect();
    Ok(DenseVisibility { views, point, superpoint, query })
}

/// Per view, the submatrix of rows with visible queries and columns with
/// visible superpoints.
pub fn oracle_partition(pred: &ScenePrediction, vis: &DenseVisibility) -> Vec<ViewPartition> {
    let mut out = Vec::with_capacity(vis.views);
    for v in 0..vis.views {
        let mut rows = Vec::new();
        for a in 0..pred.query_count() {
            if vis.query[v][a] {
                rows.push(a as u32);
            }
        }
        let mut cols = Vec::new();
        for k in 0..pred.superpoint_count() {
            if vis.superpoint[v][k] {
                cols.push(k as u32);
            }
        }
        let mut masks = Vec::new();
        let mut classes = Vec::new();
        for &a in &rows {
            for &k in &cols {
                masks.push(pred.mask(a as usize, k as usize));
            }
            classes.push(pred.classes()[a as usize]);
        }
        out.push(ViewPartition { view_index: v as u32, query_rows: rows, superpoint_cols: cols, masks, classes });
    }
    out
}

/// Mask logits and class logits as explicit matrix products.
pub fn oracle_decode(
    queries: &FeatureMatrix,
    sp_features: &FeatureMatrix,
    text: &FeatureMatrix,
    tau: f64,
    init_superpoints: &[u32],
) -> Result<ScenePrediction> {
    let (q, n, t, c) = (queries.rows(), sp_features.rows(), text.rows(), queries.cols());
    let mut masks = vec![false; q * n];
    let mut classes = vec![0i32; q];
    for a in 0..q {
        for k in 0..n {
            let mut s = 0f64;
            for d in 0..c {
                s += queries.get(a, d) as f64 * sp_features.get(k, d) as f64;
            }
            masks[a * n + k] = s > tau;
        }
        let mut logits = Vec::with_capacity(t);
        for r in 0..t {
            let mut s = 0f64;
            for d in 0..c {
                s += queries.get(a, d) as f64 * text.get(r, d) as f64;
            }
            logits.push(s);
        }
        let mut best = 0;
        for r in 1..t {
            if logits[r] > logits[best] {
                best = r;
            }
        }
        classes[a] = best as i32;
    }
    ScenePrediction::new(n, masks, classes, init_superpoints.to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Felz,
    Pool,
    Bilinear,
    Vip,
    Decode,
}

impl OracleKind {
    pub const ALL: [OracleKind; 5] =
        [OracleKind::Felz, OracleKind::Pool, OracleKind::Bilinear, OracleKind::Vip, OracleKind::Decode];
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "felz" | "felzenszwalb" => Ok(OracleKind::Felz),
            "pool" => Ok(OracleKind::Pool),
            "bilinear" => Ok(OracleKind::Bilinear),
            "vip" | "visibility" | "partition" => Ok(OracleKind::Vip),
            "decode" => Ok(OracleKind::Decode),
            other => Err(Error::invalid(format!("unknown oracle {other:?}"))),
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Felz => "felz",
            OracleKind::Pool => "pool",
            OracleKind::Bilinear => "bilinear",
            OracleKind::Vip => "vip",
            OracleKind::Decode => "decode",
        })
    }
}

/// Enough of a failing trial to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reproduction {
    Felz {
        point_count: usize,
        edges: Vec<(u32, u32, f32)>,
        sp_thresh: f64,
        sp_min: usize,
    },
    Pool {
        rows: usize,
        cols: usize,
        features: Vec<f32>,
        labels: Vec<u32>,
    },
    Bilinear {
        dims: (usize, usize, usize, usize),
        data: Vec<f32>,
        coords: Vec<(u32, f32, f32)>,
    },
    Vip {
        views: usize,
        coords: Vec<u32>,
        labels: Vec<u32>,
        init: Vec<u32>,
    },
    Decode {
        queries: Vec<Vec<f32>>,
        superpoints: Vec<Vec<f32>>,
        text: Vec<Vec<f32>>,
        tau: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub detail: String,
    pub reproduction: Reproduction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub kind: OracleKind,
    pub trials: usize,
    pub seed: u64,
    /// Largest absolute difference over all real-valued outputs.
    pub max_abs_error: f64,
    pub failures: Vec<TrialFailure>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Real-valued outputs may differ by at most this much.
pub const REAL_TOLERANCE: f64 = 1e-6;

fn max_abs_diff(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return f64::INFINITY;
    }
    a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).abs()).fold(0.0, f64::max)
}

/// Random graph with deliberately quantized weights so ties are common.
pub fn random_graph(rng: &mut ChaCha8Rng, max_points: usize, max_edges: usize) -> (usize, EdgeList) {
    let n = rng.random_range(1..=max_points);
    let possible = n * (n - 1) / 2;
    let target = rng.random_range(0..=max_edges.min(possible));
    let mut pairs = std::collections::BTreeSet::new();
    while pairs.len() < target {
        let a = rng.random_range(0..n as u32);
        let b = rng.random_range(0..n as u32);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Edge { i, j, w: rng.random_range(0..=128u32) as f32 / 64.0 })
        .collect();
    (n, EdgeList::new(edges).expect("generated edges are valid"))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMatrix::new(rows, cols, data).expect("finite random matrix")
}

fn random_labels(rng: &mut ChaCha8Rng, points: usize, max_sp: usize) -> SuperpointMask {
    let n = rng.random_range(1..=max_sp.min(points));
    let raw: Vec<u32> = (0..points).map(|i| if i < n { i as u32 } else { rng.random_range(0..n as u32) }).collect();
    SuperpointMask::compacted(&raw)
}

fn random_corr(rng: &mut ChaCha8Rng, points: usize, views: usize, dims: ViewDims) -> CorrespondenceTable {
    let entries = (0..points)
        .map(|_| Correspondence {
            view: rng.random_range(0..views as u32),
            x: rng.random_range(0.0f32..=1.0),
            y: rng.random_range(0.0f32..=1.0),
        })
        .collect();
    CorrespondenceTable::new(entries, vec![dims; views]).expect("valid random correspondences")
}

fn random_init(rng: &mut ChaCha8Rng, superpoints: usize) -> Vec<u32> {
    let q = rng.random_range(0..=superpoints);
    rand::seq::index::sample(rng, superpoints, q).into_iter().map(|k| k as u32).collect()
}

fn rows_of(m: &FeatureMatrix) -> Vec<Vec<f32>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Greedily drops edges while the two segmentations still disagree.
fn minimize_felz(n: usize, edges: &EdgeList, cfg: &SegmentConfig) -> Vec<Edge> {
    let differs = |e: &[Edge]| {
        let list = EdgeList::new(e.to_vec()).expect("subset of valid edges");
        felzenszwalb_segment(n, &list, cfg).ok() != oracle_felzenszwalb(n, &list, cfg).ok()
    };
    let mut kept = edges.edges().to_vec();
    let mut k = 0;
    while k < kept.len() {
        let mut trial = kept.clone();
        trial.remove(k);
        if differs(&trial) {
            kept = trial;
        } else {
            k += 1;
        }
    }
    kept
}

fn felz_trial(rng: &mut ChaCha8Rng) -> Result<(f64, Option<(String, Reproduction)>)> {
    let (n, edges) = random_graph(rng, 200, 2000);
    let cfg = SegmentConfig {
        sp_thresh: rng.random_range(0.05..1.0),
        sp_min: [1, 3, 10][rng.random_range(0..3)],
        ..SegmentConfig::default()
    };
    let fast = felzenszwalb_segment(n, &edges, &cfg)?;
    let slow = oracle_felzenszwalb(n, &edges, &cfg)?;
    if fast == slow {
        return Ok((0.0, None));
    }
    let kept = minimize_felz(n, &edges, &cfg);
    let detail = format!("partitions differ on N={n} with {} edges (minimized to {})", edges.len(), kept.len());
    let repro = Reproduction::Felz {
        point_count: n,
        edges: kept.iter().map(|e| (e.i, e.j, e.w)).collect(),
        sp_thresh: cfg.sp_thresh,
        sp_min: cfg.sp_min,
    };
    Ok((0.0, Some((detail, repro))))
}

fn pool_trial(rng: &mut ChaCha8Rng) -> Result<(f64, Option<(String, Reproduction)>)> {
    let points = rng.random_range(1..=400);
    let cols = rng.random_range(1..=32);
    let features = random_matrix(rng, points, cols);
    let sp = random_labels(rng, points, 60);
    let err = max_abs_diff(&pool_superpoint_features(&features, &sp)?, &oracle_pool(&features, &sp)?);
    let failure = (err > REAL_TOLERANCE).then(|| {
        (
            format!("pooled features differ by {err:e}"),
            Reproduction::Pool { rows: points, cols, features: features.data().to_vec(), labels: sp.labels().to_vec() },
        )
    });
    Ok((err, failure))
}

fn bilinear_trial(rng: &mut ChaCha8Rng) -> Result<(f64, Option<(String, Reproduction)>)> {
    let views = rng.random_range(1..=3);
    let (h, w, c) = (rng.random_range(1..=12), rng.random_range(1..=12), rng.random_range(1..=8));
    let data: Vec<f32> = (0..views * h * w * c).map(|_| rng.random_range(-2.0f32..2.0)).collect();
    let stack = ImageFeatureStack::new(views, h, w, c, data)?;
    let points = rng.random_range(1..=300);
    let mut corr = random_corr(rng, points, views, ViewDims::new(h as u32, w as u32));
    // Grid nodes and borders are the interesting cases.
    if rng.random_bool(0.5) {
        let snapped = corr
            .entries()
            .iter()
            .map(|e| Correspondence {
                view: e.view,
                x: ((e.x * (w - 1) as f32).round() / (w - 1).max(1) as f32).clamp(0.0, 1.0),
                y: ((e.y * (h - 1) as f32).round() / (h - 1).max(1) as f32).clamp(0.0, 1.0),
            })
            .collect();
        corr = CorrespondenceTable::new(snapped, corr.view_dims().to_vec())?;
    }
    let err = max_abs_diff(&sample_point_features(&stack, &corr)?, &oracle_bilinear(&stack, &corr)?);
    let failure = (err > REAL_TOLERANCE).then(|| {
        (
            format!("sampled features differ by {err:e}"),
            Reproduction::Bilinear {
                dims: (views, h, w, c),
                data: stack.data().to_vec(),
                coords: corr.entries().iter().map(|e| (e.view, e.x, e.y)).collect(),
            },
        )
    });
    Ok((err, failure))
}

fn vip_trial(rng: &mut ChaCha8Rng) -> Result<(f64, Option<(String, Reproduction)>)> {
    let views = rng.random_range(1..=5);
    let points = rng.random_range(1..=300);
    let corr = random_corr(rng, points, views, ViewDims::new(4, 4));
    let sp = random_labels(rng, points, 40);
    let n = sp.superpoint_count();
    let init = random_init(rng, n);
    let q = init.len();
    let masks = (0..q * n).map(|_| rng.random_bool(0.5)).collect();
    let classes = (0..q).map(|_| rng.random_range(0..20)).collect();
    let pred = ScenePrediction::new(n, masks, classes, init.clone())?;

    let fast = compute_visibility(&corr, &sp, &init)?;
    let slow = oracle_visibility(&corr, &sp, &init)?;
    let mut problems = Vec::new();
    for v in 0..views {
        if fast.point_row(v) != slow.point[v] {
            problems.push(format!("point visibility differs in view {v}"));
        }
        if fast.superpoint_row(v) != slow.superpoint[v].as_slice() {
            problems.push(format!("superpoint visibility differs in view {v}"));
        }
        if fast.query_row(v) != slow.query[v].as_slice() {
            problems.push(format!("query visibility differs in view {v}"));
        }
    }
    if partition_predictions(&pred, &fast)? != oracle_partition(&pred, &slow) {
        problems.push("partitions differ".into());
    }
    let failure = (!problems.is_empty()).then(|| {
        (
            problems.join("; "),
            Reproduction::Vip {
                views,
                coords: corr.entries().iter().map(|e| e.view).collect(),
                labels: sp.labels().to_vec(),
                init: init.clone(),
            },
        )
    });
    Ok((0.0, failure))
}

fn decode_trial(rng: &mut ChaCha8Rng) -> Result<(f64, Option<(String, Reproduction)>)> {
    let c = rng.random_range(1..=24);
    let n = rng.random_range(1..=80);
    let t = rng.random_range(1..=30);
    let sp = random_matrix(rng, n, c);
    let init = random_init(rng, n);
    let mut queries = random_matrix(rng, init.len(), c);
    let mut text = random_matrix(rng, t, c);
    // Duplicate text rows force arg-max ties.
    if t > 1 && rng.random_bool(0.5) {
        let mut rows = rows_of(&text);
        rows[t - 1] = rows[0].clone();
        text = FeatureMatrix::from_rows(&rows)?;
    }
    if queries.rows() > 0 && rng.random_bool(0.3) {
        let rows: Vec<Vec<f32>> = init.iter().map(|&s| sp.row(s as usize).to_vec()).collect();
        queries = FeatureMatrix::from_rows(&rows)?;
    }
    let tau = rng.random_range(-0.5..0.5);
    let fast = decode_predictions(&queries, &sp, &text, tau, &init)?;
    let slow = oracle_decode(&queries, &sp, &text, tau, &init)?;
    let failure = (fast != slow).then(|| {
        (
            "decoded masks or classes differ".to_string(),
            Reproduction::Decode { queries: rows_of(&queries), superpoints: rows_of(&sp), text: rows_of(&text), tau },
        )
    });
    Ok((0.0, failure))
}

/// Compares an optimized operation against its oracle on `trials` random
/// instances drawn from `seed`.
pub fn run_oracle(kind: OracleKind, trials: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { kind, trials, seed, max_abs_error: 0.0, failures: Vec::new() };
    for trial in 0..trials {
        let (err, failure) = match kind {
            OracleKind::Felz => felz_trial(&mut rng)?,
            OracleKind::Pool => pool_trial(&mut rng)?,
            OracleKind::Bilinear => bilinear_trial(&mut rng)?,
            OracleKind::Vip => vip_trial(&mut rng)?,
            OracleKind::Decode => decode_trial(&mut rng)?,
        };
        report.max_abs_error = report.max_abs_error.max(err);
        if let Some((detail, reproduction)) = failure {
            report.failures.push(TrialFailure { trial, detail, reproduction });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_structures() {
        let cfg = SegmentConfig::default();
        let sp = oracle_felzenszwalb(1, &EdgeList::default(), &cfg).unwrap();
        assert_eq!(sp.labels(), &[0]);
        assert_eq!(sp, felzenszwalb_segment(1, &EdgeList::default(), &cfg).unwrap());
        let f = FeatureMatrix::from_rows(&[[1.5f32, -2.0]]).unwrap();
        assert_eq!(oracle_pool(&f, &sp).unwrap(), f);
        assert_eq!(pool_superpoint_features(&f, &sp).unwrap(), f);
    }

    #[test]
    fn hand_traces_agree() {
        let edges = EdgeList::new(vec![
            Edge { i: 0, j: 1, w: 0.01 },
            Edge { i: 1, j: 2, w: 0.01 },
            Edge { i: 2, j: 3, w: 1.5 },
        ])
        .unwrap();
        for sp_min in [1, 2] {
            let cfg = SegmentConfig { sp_min, ..SegmentConfig::default() };
            assert_eq!(
                oracle_felzenszwalb(4, &edges, &cfg).unwrap(),
                felzenszwalb_segment(4, &edges, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn every_oracle_passes_a_few_trials() {
        for kind in OracleKind::ALL {
            let report = run_oracle(kind, 5, 1).unwrap();
            assert!(report.passed(), "{kind}: {:?}", report.failures);
        }
    }

    #[test]
    fn kind_names() {
        for kind in OracleKind::ALL {
            assert_eq!(kind.to_string().parse::<OracleKind>().unwrap(), kind);
        }
    }
}
