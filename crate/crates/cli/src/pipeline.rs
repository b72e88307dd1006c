//! Stage functions shared by the subcommands, and the cached, manifest-writing
//! pipeline runner built from them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use log::{info, warn};
use ovseg3r_core::geometry::{build_knn_index, estimate_normals, NormalField};
use ovseg3r_core::lifting::{lift_masks, pool_superpoint_features, sample_point_features};
use ovseg3r_core::model::codec::decode_raster;
use ovseg3r_core::model::{CorrespondenceTable, FeatureMatrix, ImageFeatureStack, ScenePrediction, SuperpointMask};
use ovseg3r_core::superpoint::{build_boundary_aware_graph, build_geometry_graph, felzenszwalb_segment, EdgeList, SegmentConfig};
use ovseg3r_core::vip::{compute_visibility, decode_predictions, partition_predictions, sample_init_superpoints};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{PipelineConfig, ResolvedConfig};
use crate::error::{CliError, CliResult};
use crate::io;

pub const TOOL: &str = concat!("ovseg3r ", env!("CARGO_PKG_VERSION"));

pub fn read_raster(path: &Path) -> CliResult<ovseg3r_core::model::InstanceRaster> {
    let bytes = io::read_bytes(path)?;
    let (raster, relabeled) =
        decode_raster(&bytes).map_err(|e| CliError::Read { path: path.into(), source: e.into() })?;
    if relabeled {
        warn!("{}: instance ids were not contiguous per view and have been relabeled", path.display());
    }
    Ok(raster)
}

pub fn point_origins(corr: &CorrespondenceTable, origins_path: &Path) -> CliResult<Vec<[f32; 3]>> {
    let per_view: Vec<[f32; 3]> = io::read_json(origins_path)?;
    if per_view.len() != corr.view_count() {
        return Err(CliError::config(format!(
            "{}: {} origins for {} views",
            origins_path.display(),
            per_view.len(),
            corr.view_count()
        )));
    }
    Ok(corr.entries().iter().map(|e| per_view[e.view as usize]).collect())
}

pub fn normals(points: &Path, k: usize, orient: Option<(&Path, &Path)>, out: &Path) -> CliResult<NormalField> {
    let cloud = io::read_points(points)?;
    let origins = match orient {
        Some((corr, origins)) => Some(point_origins(&io::read(corr)?, origins)?),
        None => None,
    };
    let index = build_knn_index(&cloud, k)?;
    let field = estimate_normals(&cloud, &index, origins.as_deref())?;
    let degenerate = field.degenerate().iter().filter(|&&d| d).count();
    if degenerate > 0 {
        warn!("{degenerate} points have degenerate neighborhoods and received the fallback normal");
    }
    io::write(out, &field.to_matrix())?;
    Ok(field)
}

/// `masks` is `(corr, raster)`; without it the graph ignores 2D instances.
pub fn graph(
    points: &Path,
    normals: &Path,
    masks: Option<(&Path, &Path)>,
    k: usize,
    cfg: &SegmentConfig,
    out: &Path,
) -> CliResult<EdgeList> {
    let cloud = io::read_points(points)?;
    let field = NormalField::from_matrix(&io::read::<FeatureMatrix>(normals)?)?;
    let index = build_knn_index(&cloud, k)?;
    let edges = match masks {
        Some((corr, raster)) => {
            let corr: CorrespondenceTable = io::read(corr)?;
            let raster = read_raster(raster)?;
            build_boundary_aware_graph(&cloud, &field, &index, &corr, &raster, cfg)?
        }
        None => build_geometry_graph(&field, &index)?,
    };
    io::write(out, &edges)?;
    Ok(edges)
}

pub fn segment(points: &Path, edges: &Path, cfg: &SegmentConfig, out: &Path) -> CliResult<SuperpointMask> {
    let cloud = io::read_points(points)?;
    let edges: EdgeList = io::read(edges)?;
    let sp = felzenszwalb_segment(cloud.len(), &edges, cfg)?;
    io::write(out, &sp)?;
    Ok(sp)
}

pub fn lift(raster: &Path, corr: &Path, out: Option<&Path>) -> CliResult<()> {
    let corr: CorrespondenceTable = io::read(corr)?;
    let ann = lift_masks(&read_raster(raster)?, &corr)?;
    io::emit_json(out, &ann)
}

pub fn sample_features(stack: &Path, corr: &Path, out: &Path) -> CliResult<FeatureMatrix> {
    let stack: ImageFeatureStack = io::read(stack)?;
    let corr: CorrespondenceTable = io::read(corr)?;
    let f = sample_point_features(&stack, &corr)?;
    io::write(out, &f)?;
    Ok(f)
}

pub fn read_superpoints(path: &Path, lenient: bool) -> CliResult<SuperpointMask> {
    let bytes = io::read_bytes(path)?;
    ovseg3r_core::model::codec::decode_superpoints(&bytes, !lenient)
        .map_err(|e| CliError::Read { path: path.into(), source: e.into() })
}

pub fn pool(features: &Path, superpoints: &Path, lenient: bool, out: &Path) -> CliResult<FeatureMatrix> {
    let f: FeatureMatrix = io::read(features)?;
    let pooled = pool_superpoint_features(&f, &read_superpoints(superpoints, lenient)?)?;
    io::write(out, &pooled)?;
    Ok(pooled)
}

pub struct DecodeInputs<'a> {
    pub superpoint_features: &'a Path,
    pub text: &'a Path,
    /// Explicit query features; by default the features of the selected superpoints.
    pub queries: Option<&'a Path>,
    /// Explicit selection; by default `num_queries` superpoints drawn with `seed`.
    pub init: Option<Vec<u32>>,
    pub num_queries: Option<usize>,
    pub num_classes: Option<usize>,
    pub tau: f64,
    pub seed: u64,
}

pub fn decode(inputs: &DecodeInputs<'_>, out: &Path) -> CliResult<ScenePrediction> {
    let s: FeatureMatrix = io::read(inputs.superpoint_features)?;
    let text: FeatureMatrix = io::read(inputs.text)?;
    if let Some(t) = inputs.num_classes {
        if text.rows() != t {
            return Err(CliError::config(format!(
                "{}: {} text rows but T = {t}",
                inputs.text.display(),
                text.rows()
            )));
        }
    }
    let n = s.rows();
    let init = match &inputs.init {
        Some(init) => init.clone(),
        None => sample_init_superpoints(n, inputs.num_queries.unwrap_or(100).min(n), inputs.seed)?,
    };
    let queries = match inputs.queries {
        Some(p) => io::read(p)?,
        None => {
            ovseg3r_core::model::check_init_superpoints(&init, n)?;
            let data = init.iter().flat_map(|&k| s.row(k as usize).to_vec()).collect();
            FeatureMatrix::new(init.len(), s.cols(), data)?
        }
    };
    let pred = decode_predictions(&queries, &s, &text, inputs.tau, &init)?;
    io::write(out, &pred)?;
    Ok(pred)
}

pub fn partition_file(view: u32) -> String {
    format!("view_{view}.ovpr")
}

/// Without `out_dir` the full partitions go to stdout as JSON. With it, each
/// view's slice is written as `view_<v>.ovpr` next to an `index.json` of rows
/// and columns.
pub fn partition(prediction: &Path, superpoints: &Path, corr: &Path, out_dir: Option<&Path>) -> CliResult<()> {
    let pred: ScenePrediction = io::read(prediction)?;
    let sp = read_superpoints(superpoints, false)?;
    let corr: CorrespondenceTable = io::read(corr)?;
    let vis = compute_visibility(&corr, &sp, pred.init_superpoints())?;
    let parts = partition_predictions(&pred, &vis)?;
    let Some(dir) = out_dir else {
        return io::emit_json(None, &parts);
    };
    let mut index = Vec::with_capacity(parts.len());
    for p in &parts {
        io::write(&dir.join(partition_file(p.view_index)), &p.to_prediction(&pred)?)?;
        index.push(json!({
            "view": p.view_index,
            "file": partition_file(p.view_index),
            "query_rows": p.query_rows,
            "superpoint_cols": p.superpoint_cols,
        }));
    }
    io::write_json(&dir.join("index.json"), &index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ran,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub stage: &'static str,
    pub outcome: Outcome,
}

pub const STAGES: [&str; 8] =
    ["normals", "graph", "segment", "lift", "sample-features", "pool", "decode", "partition"];

pub fn manifest_path(out_dir: &Path, stage: &str) -> PathBuf {
    out_dir.join("manifests").join(format!("{stage}.json"))
}

pub fn timing_path(out_dir: &Path, stage: &str) -> PathBuf {
    out_dir.join("timings").join(format!("{stage}.json"))
}

struct Runner<'a> {
    out_dir: &'a Path,
    force: bool,
    reports: Vec<StageReport>,
}

impl Runner<'_> {
    /// Paths inside the output directory are recorded relative to it so
    /// manifests do not depend on where the run was placed.
    fn display(&self, p: &Path) -> String {
        p.strip_prefix(self.out_dir).unwrap_or(p).to_string_lossy().replace('\\', "/")
    }

    fn digests(&self, paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
        paths
            .iter()
            .map(|p| Ok(FileDigest { path: self.display(p), sha256: io::sha256_file(p)? }))
            .collect()
    }

    fn up_to_date(&self, stage: &str, inputs: &[PathBuf], outputs: &[PathBuf], config: &Value) -> bool {
        let Ok(old) = io::read_json::<Manifest>(&manifest_path(self.out_dir, stage)) else {
            return false;
        };
        if old.config != *config || old.tool != TOOL {
            return false;
        }
        let mtime = |p: &Path| fs::metadata(p).and_then(|m| m.modified()).ok();
        let newest_input = inputs.iter().map(|p| mtime(p)).collect::<Option<Vec<SystemTime>>>();
        let oldest_output = outputs.iter().map(|p| mtime(p)).collect::<Option<Vec<SystemTime>>>();
        let (Some(ins), Some(outs)) = (newest_input, oldest_output) else {
            return false;
        };
        if outs.iter().min() < ins.iter().max() {
            return false;
        }
        matches!(self.digests(inputs), Ok(d) if d == old.inputs) && matches!(self.digests(outputs), Ok(d) if d == old.outputs)
    }

    fn stage<F>(&mut self, stage: &'static str, inputs: Vec<PathBuf>, outputs: &[&str], config: Value, body: F) -> CliResult<()>
    where
        F: FnOnce(&[PathBuf]) -> CliResult<()>,
    {
        let outputs: Vec<PathBuf> = outputs.iter().map(|o| self.out_dir.join(o)).collect();
        let wrap = |e: CliError| CliError::Stage { stage, source: Box::new(e) };
        if !self.force && self.up_to_date(stage, &inputs, &outputs, &config) {
            info!("{stage}: up to date, skipped");
            self.reports.push(StageReport { stage, outcome: Outcome::Skipped });
            return Ok(());
        }
        for p in &inputs {
            if !p.exists() {
                return Err(wrap(CliError::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "input not found"))));
            }
        }
        let started = Instant::now();
        let manifest = manifest_path(self.out_dir, stage);
        let result = body(&outputs).and_then(|()| {
            let m = Manifest {
                stage: stage.to_string(),
                tool: TOOL.to_string(),
                config: config.clone(),
                inputs: self.digests(&inputs)?,
                outputs: self.digests(&outputs)?,
            };
            io::write_json(&manifest, &m)
        });
        if let Err(e) = result {
            for p in outputs.iter().chain([&manifest]) {
                if p.exists() {
                    let _ = fs::remove_file(p);
                }
            }
            return Err(wrap(e));
        }
        let seconds = started.elapsed().as_secs_f64();
        io::write_json(&timing_path(self.out_dir, stage), &json!({ "stage": stage, "seconds": seconds }))
            .map_err(wrap)?;
        info!("{stage}: done in {seconds:.3} s");
        self.reports.push(StageReport { stage, outcome: Outcome::Ran });
        Ok(())
    }
}

/// Decodes every external input once so that a bad file fails before any
/// stage runs.
fn validate_inputs(
    points: &Path,
    corr: &Path,
    raster: &Path,
    origins: Option<&Path>,
    features: Option<&(PathBuf, PathBuf)>,
) -> CliResult<usize> {
    let cloud = io::read_points(points)?;
    let table: CorrespondenceTable = io::read(corr)?;
    if table.len() != cloud.len() {
        return Err(CliError::config(format!(
            "{} has {} records but {} has {} points",
            corr.display(),
            table.len(),
            points.display(),
            cloud.len()
        )));
    }
    read_raster(raster)?.check_matches(&table)?;
    if let Some(o) = origins {
        point_origins(&table, o)?;
    }
    if let Some((stack, text)) = features {
        let stack: ImageFeatureStack = io::read(stack)?;
        let text: FeatureMatrix = io::read(text)?;
        if stack.channels() != text.cols() {
            return Err(CliError::config(format!(
                "image features have {} channels but text embeddings have {}",
                stack.channels(),
                text.cols()
            )));
        }
    }
    Ok(table.view_count())
}

/// Runs every applicable stage in order, skipping those whose outputs are
/// current. Returns one report per stage.
pub fn run_pipeline(config: PipelineConfig, force: bool) -> CliResult<Vec<StageReport>> {
    let ResolvedConfig { points, corr, raster, origins, features, out_dir, raw } = config.resolve()?;
    let views = validate_inputs(&points, &corr, &raster, origins.as_deref(), features.as_ref())
        .map_err(|e| CliError::Stage { stage: "inputs", source: Box::new(e) })?;
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let seg = raw.segment_config();
    let mut run = Runner { out_dir: &out_dir, force, reports: Vec::new() };
    let artifact = |name: &str| out_dir.join(name);

    let mut inputs = vec![points.clone()];
    if let Some(o) = &origins {
        inputs.extend([corr.clone(), o.clone()]);
    }
    run.stage("normals", inputs, &["normals.ovfm"], json!({ "k": raw.k, "oriented": origins.is_some() }), |out| {
        normals(&points, raw.k, origins.as_deref().map(|o| (corr.as_path(), o)), &out[0]).map(drop)
    })?;

    let graph_cfg = json!({
        "k": raw.k,
        "cross_view_policy": seg.cross_view_policy,
        "background_policy": seg.background_policy,
    });
    let inputs = vec![points.clone(), artifact("normals.ovfm"), corr.clone(), raster.clone()];
    run.stage("graph", inputs, &["edges.oveg"], graph_cfg, |out| {
        graph(&points, &artifact("normals.ovfm"), Some((&corr, &raster)), raw.k, &seg, &out[0]).map(drop)
    })?;

    let seg_cfg = json!({ "sp_thresh": seg.sp_thresh, "sp_min": seg.sp_min });
    run.stage("segment", vec![points.clone(), artifact("edges.oveg")], &["superpoints.ovsp"], seg_cfg, |out| {
        segment(&points, &artifact("edges.oveg"), &seg, &out[0]).map(drop)
    })?;

    run.stage("lift", vec![raster.clone(), corr.clone()], &["annotations.json"], json!({}), |out| {
        lift(&raster, &corr, Some(&out[0]))
    })?;

    let Some((stack, text)) = features else {
        info!("no image features configured; stopping after lift");
        return Ok(run.reports);
    };

    run.stage("sample-features", vec![stack.clone(), corr.clone()], &["point_features.ovfm"], json!({}), |out| {
        sample_features(&stack, &corr, &out[0]).map(drop)
    })?;

    let inputs = vec![artifact("point_features.ovfm"), artifact("superpoints.ovsp")];
    run.stage("pool", inputs, &["superpoint_features.ovfm"], json!({}), |out| {
        pool(&artifact("point_features.ovfm"), &artifact("superpoints.ovsp"), false, &out[0]).map(drop)
    })?;

    let decode_cfg = json!({
        "tau": raw.tau,
        "T": raw.num_classes,
        "num_queries": raw.num_queries,
        "seed": raw.seed,
    });
    run.stage("decode", vec![artifact("superpoint_features.ovfm"), text.clone()], &["prediction.ovpr"], decode_cfg, |out| {
        let inputs = DecodeInputs {
            superpoint_features: &artifact("superpoint_features.ovfm"),
            text: &text,
            queries: None,
            init: None,
            num_queries: raw.num_queries,
            num_classes: raw.num_classes,
            tau: raw.tau,
            seed: raw.seed,
        };
        decode(&inputs, &out[0]).map(drop)
    })?;

    let inputs = vec![artifact("prediction.ovpr"), artifact("superpoints.ovsp"), corr.clone()];
    let mut outputs = vec!["partitions/index.json".to_string()];
    outputs.extend((0..views as u32).map(|v| format!("partitions/{}", partition_file(v))));
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    run.stage("partition", inputs, &outputs, json!({}), |_| {
        partition(&artifact("prediction.ovpr"), &artifact("superpoints.ovsp"), &corr, Some(&artifact("partitions")))
    })?;

    Ok(run.reports)
}

/// Re-hashes every artifact listed in the manifests under `out_dir`.
/// Returns the paths whose digests no longer match.
pub fn verify_manifests(out_dir: &Path) -> CliResult<Vec<String>> {
    let mut bad = Vec::new();
    for stage in STAGES {
        let path = manifest_path(out_dir, stage);
        if !path.exists() {
            continue;
        }
        let m: Manifest = io::read_json(&path)?;
        for d in m.outputs.iter() {
            let p = out_dir.join(&d.path);
            if io::sha256_file(&p).ok().as_deref() != Some(d.sha256.as_str()) {
                bad.push(d.path.clone());
            }
        }
    }
    Ok(bad)
}
