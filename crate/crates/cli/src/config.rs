use std::path::PathBuf;

use ovseg3r_core::superpoint::{BackgroundPolicy, CrossViewPolicy, SegmentConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything the pipeline needs, as read from a JSON document. Relative
/// paths resolve against the working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub points: Option<PathBuf>,
    pub corr: Option<PathBuf>,
    pub raster: Option<PathBuf>,
    /// Per-view camera origins (JSON list of `[x, y, z]`) for normal orientation.
    pub origins: Option<PathBuf>,
    /// Image feature stack; enables feature sampling, pooling and decoding.
    pub features: Option<PathBuf>,
    /// Text embeddings, one row per prompt class.
    pub text: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub k: usize,
    pub sp_thresh: f64,
    pub sp_min: usize,
    pub cross_view_policy: CrossViewPolicy,
    pub background_policy: BackgroundPolicy,
    pub tau: f64,
    /// Expected number of text rows.
    #[serde(rename = "T", alias = "num_classes")]
    pub num_classes: Option<usize>,
    /// Queries to decode; defaults to `min(n, 100)`.
    pub num_queries: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seg = SegmentConfig::default();
        Self {
            points: None,
            corr: None,
            raster: None,
            origins: None,
            features: None,
            text: None,
            out_dir: None,
            k: ovseg3r_core::geometry::DEFAULT_K,
            sp_thresh: seg.sp_thresh,
            sp_min: seg.sp_min,
            cross_view_policy: seg.cross_view_policy,
            background_policy: seg.background_policy,
            tau: 0.0,
            num_classes: None,
            num_queries: None,
            seed: 0,
        }
    }
}

/// A validated configuration with every required path present.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub points: PathBuf,
    pub corr: PathBuf,
    pub raster: PathBuf,
    pub origins: Option<PathBuf>,
    pub features: Option<(PathBuf, PathBuf)>,
    pub out_dir: PathBuf,
    pub raw: PipelineConfig,
}

impl PipelineConfig {
    pub fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            sp_thresh: self.sp_thresh,
            sp_min: self.sp_min,
            cross_view_policy: self.cross_view_policy,
            background_policy: self.background_policy,
        }
    }

    pub fn resolve(self) -> CliResult<ResolvedConfig> {
        let need = |p: &Option<PathBuf>, name: &str| {
            p.clone().ok_or_else(|| CliError::config(format!("`{name}` is required")))
        };
        self.segment_config().validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.k < 3 {
            return Err(CliError::config(format!("k must be at least 3, got {}", self.k)));
        }
        if !self.tau.is_finite() {
            return Err(CliError::config("tau must be finite"));
        }
        if self.num_classes == Some(0) {
            return Err(CliError::config("T must be at least 1"));
        }
        if self.num_queries == Some(0) {
            return Err(CliError::config("num_queries must be at least 1"));
        }
        let features = match (&self.features, &self.text) {
            (Some(f), Some(t)) => Some((f.clone(), t.clone())),
            (None, None) => None,
            _ => return Err(CliError::config("`features` and `text` must be given together")),
        };
        Ok(ResolvedConfig {
            points: need(&self.points, "points")?,
            corr: need(&self.corr, "corr")?,
            raster: need(&self.raster, "raster")?,
            out_dir: need(&self.out_dir, "out_dir")?,
            origins: self.origins.clone(),
            features,
            raw: self,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"k": 8, "sp_tresh": 0.2}"#).unwrap_err();
        assert!(err.to_string().contains("sp_tresh"));
    }

    #[test]
    fn t_key_and_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"T": 5, "cross_view_policy": "keep"}"#).unwrap();
        assert_eq!(c.num_classes, Some(5));
        assert_eq!(c.cross_view_policy, CrossViewPolicy::Keep);
        assert_eq!(c.k, 16);
    }

    #[test]
    fn validation() {
        let base = PipelineConfig {
            points: Some("p".into()),
            corr: Some("c".into()),
            raster: Some("r".into()),
            out_dir: Some("o".into()),
            ..Default::default()
        };
        assert!(base.clone().resolve().is_ok());
        assert!(PipelineConfig { k: 2, ..base.clone() }.resolve().is_err());
        assert!(PipelineConfig { sp_thresh: -1.0, ..base.clone() }.resolve().is_err());
        assert!(PipelineConfig { features: Some("f".into()), ..base.clone() }.resolve().is_err());
        assert!(PipelineConfig { out_dir: None, ..base }.resolve().is_err());
    }
}
