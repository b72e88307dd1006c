use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ovseg3r_cli::pipeline::verify_manifests;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ovseg3r"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, n: &str) {
    ok(dir, &["synth", "--scene", "box-room", "--n", n, "--views", "3", "--sigma", "0.01", "--seed", "5", "--out", "b"]);
}

fn pipeline_args(out: &str) -> Vec<String> {
    [
        "pipeline",
        "--points",
        "b/points.ply",
        "--corr",
        "b/corr.ov3c",
        "--raster",
        "b/raster.ov2m",
        "--origins",
        "b/origins.json",
        "--features",
        "b/features.ovif",
        "--text",
        "b/text.ovfm",
        "--out-dir",
        out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn outcomes(stdout: &str) -> Vec<(String, String)> {
    let v: Value = serde_json::from_str(stdout).unwrap();
    v["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["stage"].as_str().unwrap().to_string(), s["outcome"].as_str().unwrap().to_string()))
        .collect()
}

fn as_str(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn pipeline_runs_caches_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "8000");
    let args = pipeline_args("run");
    let first = outcomes(&ok(dir, &as_str(&args)));
    assert_eq!(first.len(), 8);
    assert!(first.iter().all(|(_, o)| o == "ran"));
    for f in [
        "normals.ovfm",
        "edges.oveg",
        "superpoints.ovsp",
        "annotations.json",
        "point_features.ovfm",
        "superpoint_features.ovfm",
        "prediction.ovpr",
        "partitions/index.json",
        "partitions/view_0.ovpr",
        "partitions/view_2.ovpr",
    ] {
        assert!(dir.join("run").join(f).exists(), "{f} missing");
    }
    assert!(verify_manifests(&dir.join("run")).unwrap().is_empty());

    let second = outcomes(&ok(dir, &as_str(&args)));
    assert!(second.iter().all(|(_, o)| o == "skipped"), "{second:?}");

    let mut changed = args.clone();
    changed.extend(["--sp-thresh".to_string(), "0.2".to_string()]);
    let third = outcomes(&ok(dir, &as_str(&changed)));
    let ran: Vec<&str> = third.iter().filter(|(_, o)| o == "ran").map(|(s, _)| s.as_str()).collect();
    assert_eq!(ran, ["segment", "pool", "decode", "partition"]);

    let mut forced = changed;
    forced.push("--force".to_string());
    assert!(outcomes(&ok(dir, &as_str(&forced))).iter().all(|(_, o)| o == "ran"));

    std::fs::write(dir.join("run/edges.oveg"), b"tampered").unwrap();
    assert_eq!(verify_manifests(&dir.join("run")).unwrap(), vec!["edges.oveg".to_string()]);
}

#[test]
fn subcommands_reproduce_pipeline_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "5000");
    ok(dir, &as_str(&pipeline_args("run")));
    ok(dir, &["normals", "--points", "b/points.ply", "--corr", "b/corr.ov3c", "--origins", "b/origins.json", "--out", "s/normals.ovfm"]);
    ok(dir, &[
        "graph", "--points", "b/points.ply", "--normals", "s/normals.ovfm", "--corr", "b/corr.ov3c", "--raster",
        "b/raster.ov2m", "--out", "s/edges.oveg",
    ]);
    ok(dir, &["segment", "--points", "b/points.ply", "--edges", "s/edges.oveg", "--out", "s/superpoints.ovsp"]);
    ok(dir, &["lift", "--raster", "b/raster.ov2m", "--corr", "b/corr.ov3c", "--out", "s/annotations.json"]);
    ok(dir, &["sample-features", "--features", "b/features.ovif", "--corr", "b/corr.ov3c", "--out", "s/point_features.ovfm"]);
    ok(dir, &["pool", "--features", "s/point_features.ovfm", "--superpoints", "s/superpoints.ovsp", "--out", "s/superpoint_features.ovfm"]);
    ok(dir, &["decode", "--superpoint-features", "s/superpoint_features.ovfm", "--text", "b/text.ovfm", "--out", "s/prediction.ovpr"]);
    ok(dir, &["partition", "--prediction", "s/prediction.ovpr", "--superpoints", "s/superpoints.ovsp", "--corr", "b/corr.ov3c", "--out", "s/partitions"]);
    let mut compared = 0;
    for sub in ["", "partitions"] {
        for f in std::fs::read_dir(dir.join("s").join(sub)).unwrap() {
            let path = f.unwrap().path();
            if path.is_dir() {
                continue;
            }
            let rel = path.strip_prefix(dir.join("s")).unwrap();
            let b = std::fs::read(dir.join("run").join(rel)).unwrap();
            assert!(std::fs::read(&path).unwrap() == b, "{rel:?} differs");
            compared += 1;
        }
    }
    assert_eq!(compared, 11);
}

#[test]
fn documented_flag_spellings() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--scene", "flush-object", "--n", "3000", "--views", "2", "--sigma", "0.01", "--seed", "42", "--out", "b/"]);
    ok(dir, &["normals", "--points", "b/points.ply", "--out", "n.ovfm"]);
    ok(dir, &[
        "graph", "--points", "b/points.ply", "--normals", "n.ovfm", "--corr", "b/corr.ov3c", "--masks", "b/raster.ov2m", "--k",
        "16", "--cross-view", "keep", "--background", "prune", "--out", "e.oveg",
    ]);
    ok(dir, &["segment", "--points", "b/points.ply", "--edges", "e.oveg", "--thresh", "0.1", "--min-size", "25", "--out", "sp.ovsp"]);
    ok(dir, &["sample-features", "--features", "b/features.ovif", "--corr", "b/corr.ov3c", "--out", "pf.ovfm"]);
    let ann: Value = serde_json::from_str(&ok(dir, &["lift", "--masks", "b/raster.ov2m", "--corr", "b/corr.ov3c"])).unwrap();
    assert_eq!(ann.as_array().unwrap().len(), 2);
    assert!(ann[0]["points"].is_array() && ann[0]["ids"].is_array());
    ok(dir, &["pool", "--point-features", "pf.ovfm", "--superpoints", "sp.ovsp", "--out", "spf.ovfm"]);
    std::fs::write(dir.join("vocab.txt"), "lamp\nchair\ntable\nbed\nsink\ndesk\n").unwrap();
    let prompt: Value = serde_json::from_str(&ok(dir, &["prompt", "--positive", "book,sofa", "--vocab", "vocab.txt", "--T", "8", "--seed", "0"])).unwrap();
    assert_eq!(prompt["prompt_string"].as_str().unwrap().matches(" . ").count() + 1, 8);
    std::fs::write(dir.join("idx.txt"), "0\n1 2\n").unwrap();
    ok(dir, &["decode", "--sp-features", "spf.ovfm", "--text", "b/text.ovfm", "--tau", "0.0", "--init", "idx.txt", "--out", "p.ovpr"]);
    ok(dir, &["partition", "--pred", "p.ovpr", "--superpoints", "sp.ovsp", "--corr", "b/corr.ov3c", "--out", "parts/"]);
    let index: Value = serde_json::from_slice(&std::fs::read(dir.join("parts/index.json")).unwrap()).unwrap();
    assert_eq!(index.as_array().unwrap().len(), 2);
    for entry in index.as_array().unwrap() {
        assert!(dir.join("parts").join(entry["file"].as_str().unwrap()).exists());
    }
    let rows: usize = index.as_array().unwrap().iter().map(|e| e["query_rows"].as_array().unwrap().len()).sum();
    assert!(rows >= 3, "every init query lands in some view");
    let out = run(dir, &["decode", "--sp-features", "spf.ovfm", "--text", "b/text.ovfm", "--init", "0,x", "--out", "q.ovpr"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_magic_is_reported_with_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "2000");
    let mut bytes = std::fs::read(dir.join("b/corr.ov3c")).unwrap();
    bytes[..4].copy_from_slice(b"JUNK");
    std::fs::write(dir.join("b/corr.ov3c"), bytes).unwrap();
    let mut args = pipeline_args("run");
    args.insert(0, "--json".into());
    let out = run(dir, &as_str(&args));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let err: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["class"], "bad_magic");
    assert_eq!(err["error"]["offset"], 0);
    assert!(err["error"]["message"].as_str().unwrap().contains("OV3C"));
    assert!(!dir.join("run/normals.ovfm").exists());
}

#[test]
fn failing_stage_is_named_and_cleaned_up() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "2000");
    let mut args = pipeline_args("run");
    args.extend(["--T".to_string(), "999".to_string()]);
    let out = run(dir, &as_str(&args));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("stage decode failed"), "{stderr}");
    assert!(dir.join("run/superpoint_features.ovfm").exists());
    assert!(!dir.join("run/prediction.ovpr").exists());
    assert!(!dir.join("run/manifests/decode.json").exists());
}

#[test]
fn config_file_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "2000");
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"points": "b/points.ply", "corr": "b/corr.ov3c", "raster": "b/raster.ov2m", "out_dir": "run", "sp_min": 5}"#,
    )
    .unwrap();
    let stages = outcomes(&ok(dir, &["pipeline", "--config", "cfg.json", "--k", "10"]));
    assert_eq!(stages.len(), 4);
    let m: Value = serde_json::from_slice(&std::fs::read(dir.join("run/manifests/segment.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["sp_min"], 5);
    let g: Value = serde_json::from_slice(&std::fs::read(dir.join("run/manifests/graph.json")).unwrap()).unwrap();
    assert_eq!(g["config"]["k"], 10);

    std::fs::write(dir.join("bad.json"), r#"{"points": "b/points.ply", "colour": 1}"#).unwrap();
    let out = run(dir, &["pipeline", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn export_ply_colors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "2000");
    ok(dir, &["export-ply", "--points", "b/points.ply", "--labels", "b/ground_truth.ovsp", "--out", "gt.ply"]);
    let a = std::fs::read(dir.join("gt.ply")).unwrap();
    ok(dir, &["export-ply", "--points", "b/points.ply", "--labels", "b/ground_truth.ovsp", "--out", "gt2.ply"]);
    assert_eq!(a, std::fs::read(dir.join("gt2.ply")).unwrap());
    std::fs::write(dir.join("short.json"), "[0, 1, -1]").unwrap();
    let out = run(dir, &["export-ply", "--points", "b/points.ply", "--labels", "short.json", "--out", "x.ply"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prompt_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(dir, &["prompt", "--positive", "book,sofa", "--total", "2"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["prompt_string"], "book . sofa .");
    let out = run(dir, &["prompt", "--positive", "book", "--vocab-list", "book", "--total", "3"]);
    assert_eq!(out.status.code(), Some(2));
    for kind in ["felz", "pool", "bilinear", "vip", "decode"] {
        let out = ok(dir, &["oracle", kind, "--trials", "10", "--seed", "3"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["failures"], 0);
    }
    assert!(!dir.join("oracle-failures").exists());
}

#[test]
fn threads_flag_and_env() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "3000");
    let normals = |extra: &[&str], env: Option<&str>, out: &str| -> PathBuf {
        let mut cmd = bin();
        cmd.current_dir(dir).args(extra).args(["normals", "--points", "b/points.ply", "--out", out]);
        if let Some(t) = env {
            cmd.env("OVSEG3R_THREADS", t);
        }
        assert!(cmd.output().unwrap().status.success());
        dir.join(out)
    };
    let a = normals(&["--threads", "1"], None, "a.ovfm");
    let b = normals(&[], Some("3"), "b.ovfm");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}
