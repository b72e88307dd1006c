use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use ovseg3r_core::lifting::build_prompt;
use ovseg3r_core::model::ViewDims;
use ovseg3r_core::superpoint::{BackgroundPolicy, CrossViewPolicy, SegmentConfig};
use ovseg3r_core::synth::oracle::{run_oracle, OracleKind};
use ovseg3r_core::synth::{generate, synthetic_features, SceneKind, SceneRecipe};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::export::export_ply;
use crate::io;
use crate::pipeline::{self, DecodeInputs};

#[derive(Debug, Parser)]
#[command(name = "ovseg3r", version, about = "Boundary-aware superpoints and view-wise partition for multi-view point clouds")]
pub struct Cli {
    /// Line-delimited JSON logs and JSON errors on stderr.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads; 0 uses every hardware thread.
    #[arg(long, global = true, env = "OVSEG3R_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, visible_alias = "thresh", default_value_t = 0.1)]
    pub sp_thresh: f64,
    #[arg(long, visible_alias = "min-size", default_value_t = 25)]
    pub sp_min: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-point normals (OVFM, N x 3).
    Normals {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 16)]
        k: usize,
        /// Orient normals toward per-view origins; needs --corr.
        #[arg(long, requires = "corr")]
        origins: Option<PathBuf>,
        #[arg(long)]
        corr: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the weighted KNN graph (OVEG), pruned at 2D instance boundaries.
    Graph {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        normals: PathBuf,
        #[arg(long, required_unless_present = "geometry_only")]
        corr: Option<PathBuf>,
        #[arg(long, visible_alias = "masks", required_unless_present = "geometry_only")]
        raster: Option<PathBuf>,
        /// Keep every KNN edge regardless of 2D instances.
        #[arg(long)]
        geometry_only: bool,
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long, visible_alias = "cross-view", default_value_t = CrossViewPolicy::Prune)]
        cross_view_policy: CrossViewPolicy,
        #[arg(long, visible_alias = "background", default_value_t = BackgroundPolicy::Label)]
        background_policy: BackgroundPolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition the graph into superpoints (OVSP).
    Segment {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        #[command(flatten)]
        seg: SegmentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-view point lists with the instance id under each point (JSON).
    Lift {
        #[arg(long, visible_alias = "masks")]
        raster: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bilinearly sample image features at every point (OVFM).
    SampleFeatures {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average point features within each superpoint (OVFM).
    Pool {
        #[arg(long, visible_alias = "point-features")]
        features: PathBuf,
        #[arg(long)]
        superpoints: PathBuf,
        /// Accept non-contiguous superpoint labels by compacting them.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pad positive class names with sampled negatives (JSON).
    Prompt {
        #[arg(long, value_delimiter = ',')]
        positive: Vec<String>,
        /// Vocabulary file, one class name per line.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        vocab_list: Vec<String>,
        #[arg(long, visible_alias = "T")]
        total: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode masks and classes from query, superpoint and text features (OVPR).
    Decode {
        #[arg(long, visible_alias = "sp-features")]
        superpoint_features: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Initializing superpoints as a comma list or a file of indices;
        /// otherwise --num-queries are sampled.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        num_queries: Option<usize>,
        /// Required number of text rows.
        #[arg(long = "T", id = "T")]
        num_classes: Option<usize>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a scene prediction into per-view predictions. With --out, a
    /// directory of per-view OVPR files and an index.json; JSON on stdout otherwise.
    Partition {
        #[arg(long, visible_alias = "pred")]
        prediction: PathBuf,
        #[arg(long)]
        superpoints: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic multi-view scene.
    Synth {
        #[arg(long)]
        scene: SceneKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        views: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 240)]
        height: u32,
        #[arg(long, default_value_t = 160)]
        width: u32,
        #[arg(long, default_value_t = 16)]
        feature_channels: usize,
        #[arg(long, default_value_t = 60)]
        feature_height: u32,
        #[arg(long, default_value_t = 40)]
        feature_width: u32,
        /// Text rows; defaults to the instance count plus 4.
        #[arg(long)]
        text_rows: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an optimized operation against its brute-force reference.
    Oracle {
        kind: OracleKind,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Where reproductions of failing trials are written.
        #[arg(long, default_value = "oracle-failures")]
        dump_dir: PathBuf,
    },
    /// Write a PLY colored by per-point labels (OVSP or a JSON integer list).
    ExportPly {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage with caching and per-stage manifests.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON configuration; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub corr: Option<PathBuf>,
    #[arg(long, visible_alias = "masks")]
    pub raster: Option<PathBuf>,
    #[arg(long)]
    pub origins: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, visible_alias = "thresh")]
    pub sp_thresh: Option<f64>,
    #[arg(long, visible_alias = "min-size")]
    pub sp_min: Option<usize>,
    #[arg(long, visible_alias = "cross-view")]
    pub cross_view_policy: Option<CrossViewPolicy>,
    #[arg(long, visible_alias = "background")]
    pub background_policy: Option<BackgroundPolicy>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long = "T", id = "T")]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub num_queries: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Re-run stages even when their outputs are current.
    #[arg(long)]
    pub force: bool,
}

impl PipelineArgs {
    pub fn config(&self) -> CliResult<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => io::read_json::<PipelineConfig>(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = Some(v.clone());
                }
            )*};
        }
        over!(points, corr, raster, origins, features, text, out_dir, num_classes, num_queries);
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v;
                }
            )*};
        }
        set!(k, sp_thresh, sp_min, cross_view_policy, background_policy, tau, seed);
        Ok(c)
    }
}

fn read_labels(path: &Path) -> CliResult<Vec<i64>> {
    let bytes = io::read_bytes(path)?;
    if bytes.starts_with(b"OVSP") {
        let sp = pipeline::read_superpoints(path, false)?;
        return Ok(sp.labels().iter().map(|&l| l as i64).collect());
    }
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("{}: expected OVSP or a JSON integer list: {e}", path.display())))
}

/// `3,17,42` inline, or a file of indices separated by commas or whitespace.
fn parse_init(arg: &str) -> CliResult<Vec<u32>> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        String::from_utf8(io::read_bytes(path)?).map_err(|_| CliError::config(format!("{arg}: not UTF-8")))?
    } else {
        arg.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::config(format!("--init: bad superpoint index {t:?}"))))
        .collect()
}

fn synth(
    recipe: SceneRecipe,
    feature_dims: ViewDims,
    channels: usize,
    text_rows: Option<usize>,
    out: &Path,
) -> CliResult<()> {
    let b = generate(&recipe)?;
    let text_rows = text_rows.unwrap_or(b.instance_count + 4);
    let (stack, text) = synthetic_features(&b, feature_dims, channels, text_rows, recipe.seed)?;
    let gt = ovseg3r_core::model::SuperpointMask::new(b.ground_truth.clone(), b.instance_count)?;
    io::write_points(&out.join("points.ply"), &b.points)?;
    io::write(&out.join("corr.ov3c"), &b.corr)?;
    io::write(&out.join("raster.ov2m"), &b.raster)?;
    io::write(&out.join("ground_truth.ovsp"), &gt)?;
    io::write(&out.join("features.ovif"), &stack)?;
    io::write(&out.join("text.ovfm"), &text)?;
    io::write_json(&out.join("origins.json"), &b.view_origins)?;
    io::write_json(&out.join("recipe.json"), &recipe)?;
    io::emit_json(
        None,
        &json!({
            "points": b.points.len(),
            "views": recipe.view_count,
            "instances": b.instance_count,
            "out": out,
        }),
    )
}

fn oracle(kind: OracleKind, trials: usize, seed: u64, dump_dir: &Path) -> CliResult<()> {
    let report = run_oracle(kind, trials, seed)?;
    io::emit_json(
        None,
        &json!({
            "kind": kind,
            "trials": trials,
            "seed": seed,
            "max_abs_error": report.max_abs_error,
            "failures": report.failures.len(),
        }),
    )?;
    if report.passed() {
        info!("{kind}: {trials} trials match the reference");
        return Ok(());
    }
    for f in &report.failures {
        let path = dump_dir.join(format!("{kind}-seed{seed}-trial{}.json", f.trial));
        io::write_json(&path, f)?;
        info!("reproduction written to {}", path.display());
    }
    Err(CliError::Invariant(format!(
        "{kind}: {} of {trials} trials disagree with the reference; reproductions in {}",
        report.failures.len(),
        dump_dir.display()
    )))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Normals { points, k, origins, corr, out } => {
            let orient = origins.as_deref().map(|o| (corr.as_deref().expect("clap requires corr"), o));
            let field = pipeline::normals(&points, k, orient, &out)?;
            info!("wrote {} normals to {}", field.len(), out.display());
        }
        Command::Graph { points, normals, corr, raster, geometry_only, k, cross_view_policy, background_policy, out } => {
            let cfg = SegmentConfig { cross_view_policy, background_policy, ..SegmentConfig::default() };
            let masks = match (geometry_only, &corr, &raster) {
                (true, _, _) => None,
                (false, Some(c), Some(r)) => Some((c.as_path(), r.as_path())),
                _ => return Err(CliError::config("--corr and --raster are required unless --geometry-only")),
            };
            let edges = pipeline::graph(&points, &normals, masks, k, &cfg, &out)?;
            info!("wrote {} edges to {}", edges.len(), out.display());
        }
        Command::Segment { points, edges, seg, out } => {
            let cfg = SegmentConfig { sp_thresh: seg.sp_thresh, sp_min: seg.sp_min, ..SegmentConfig::default() };
            let sp = pipeline::segment(&points, &edges, &cfg, &out)?;
            info!("wrote {} superpoints to {}", sp.superpoint_count(), out.display());
        }
        Command::Lift { raster, corr, out } => pipeline::lift(&raster, &corr, out.as_deref())?,
        Command::SampleFeatures { features, corr, out } => {
            let f = pipeline::sample_features(&features, &corr, &out)?;
            info!("wrote {}x{} point features to {}", f.rows(), f.cols(), out.display());
        }
        Command::Pool { features, superpoints, lenient, out } => {
            let f = pipeline::pool(&features, &superpoints, lenient, &out)?;
            info!("wrote {}x{} superpoint features to {}", f.rows(), f.cols(), out.display());
        }
        Command::Prompt { positive, vocab, mut vocab_list, total, seed, out } => {
            if let Some(p) = vocab {
                let text = String::from_utf8(io::read_bytes(&p)?)
                    .map_err(|_| CliError::config(format!("{}: not UTF-8", p.display())))?;
                vocab_list.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
            }
            let spec = build_prompt(&positive, &vocab_list, total, seed)?;
            io::emit_json(out.as_deref(), &spec)?;
        }
        Command::Decode { superpoint_features, text, queries, init, num_queries, num_classes, tau, seed, out } => {
            let inputs = DecodeInputs {
                superpoint_features: &superpoint_features,
                text: &text,
                queries: queries.as_deref(),
                init: init.as_deref().map(parse_init).transpose()?,
                num_queries,
                num_classes,
                tau,
                seed,
            };
            let pred = pipeline::decode(&inputs, &out)?;
            info!("decoded {} queries over {} superpoints", pred.query_count(), pred.superpoint_count());
        }
        Command::Partition { prediction, superpoints, corr, out } => {
            pipeline::partition(&prediction, &superpoints, &corr, out.as_deref())?
        }
        Command::Synth {
            scene,
            n,
            views,
            sigma,
            seed,
            height,
            width,
            feature_channels,
            feature_height,
            feature_width,
            text_rows,
            out,
        } => {
            let recipe = SceneRecipe {
                scene_kind: scene,
                point_count: n,
                view_count: views,
                raster_dims: ViewDims::new(height, width),
                smoothing_sigma: sigma,
                seed,
            };
            synth(recipe, ViewDims::new(feature_height, feature_width), feature_channels, text_rows, &out)?;
        }
        Command::Oracle { kind, trials, seed, dump_dir } => oracle(kind, trials, seed, &dump_dir)?,
        Command::ExportPly { points, labels, seed, out } => {
            let cloud = io::read_points(&points)?;
            let bytes = export_ply(&cloud, &read_labels(&labels)?, seed)?;
            io::write_bytes(&out, &bytes)?;
        }
        Command::Pipeline(args) => {
            let reports = pipeline::run_pipeline(args.config()?, args.force)?;
            io::emit_json(None, &json!({ "stages": reports }))?;
        }
    }
    Ok(())
}
