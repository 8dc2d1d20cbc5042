//! Settings resolution: command-line flags over a JSON config file over defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rovi_core::eval::DEFAULT_THRESHOLD_PX;
use rovi_core::pipeline::{PipelineConfig, PipelineError, Stage};
use rovi_core::planner::BackendKind;
use rovi_core::{validate_palette, StepColor};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Geometric,
    External,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Geometric => BackendKind::Geometric,
            Backend::External => BackendKind::External,
        }
    }
}

/// Flags shared by every subcommand; a config file uses the same names in snake_case.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalFlags {
    /// JSON config file mirroring these flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Palette as a JSON file or inline JSON array of {rgb, ordinal}.
    #[arg(long, global = true)]
    pub palette: Option<String>,
    /// RGB distance accepted around each palette color.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Translation tolerance of the keypoint policy, meters.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// End-effector travel per tick, meters.
    #[arg(long, global = true)]
    pub step_size: Option<f64>,
    #[arg(long, global = true)]
    pub threshold_px: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// External planner URL, used with `--backend external`.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// External planner timeout, seconds.
    #[arg(long, global = true)]
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    palette: Option<Vec<StepColor>>,
    tolerance: Option<f64>,
    epsilon: Option<f64>,
    step_size: Option<f64>,
    threshold_px: Option<f64>,
    seed: Option<u64>,
    backend: Option<Backend>,
    endpoint: Option<String>,
    timeout_secs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub threshold_px: f64,
    pub seed: u64,
}

fn config_error(message: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Input, "InvalidConfig", message)
}

fn read_palette(arg: &str) -> Result<Vec<StepColor>, PipelineError> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| config_error(format!("palette {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| config_error(format!("palette: {e}")))
}

fn read_file(path: &Path) -> Result<FileConfig, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

impl GlobalFlags {
    pub fn resolve(&self) -> Result<Settings, PipelineError> {
        let file = match &self.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let mut cfg = PipelineConfig::default();
        let palette = match &self.palette {
            Some(arg) => Some(read_palette(arg)?),
            None => file.palette,
        };
        if let Some(p) = palette {
            cfg.palette = p;
        }
        if let Some(t) = self.tolerance.or(file.tolerance) {
            cfg.parser.tolerance = t;
        }
        if let Some(e) = self.epsilon.or(file.epsilon) {
            cfg.exec.policy.eps_trans = e;
        }
        if let Some(s) = self.step_size.or(file.step_size) {
            cfg.exec.policy.step_size = s;
        }
        if let Some(b) = self.backend.or(file.backend) {
            cfg.backend.kind = b.into();
        }
        if let Some(e) = self.endpoint.clone().or(file.endpoint) {
            cfg.backend.endpoint = Some(e);
        }
        if let Some(t) = self.timeout_secs.or(file.timeout_secs) {
            cfg.backend.timeout_secs = t;
        }
        validate_palette(&cfg.palette, cfg.parser.tolerance).map_err(config_error)?;
        cfg.exec.policy.validate().map_err(config_error)?;
        let threshold_px = self.threshold_px.or(file.threshold_px).unwrap_or(DEFAULT_THRESHOLD_PX);
        if !(threshold_px > 0.0) {
            return Err(config_error("threshold_px must be positive"));
        }
        Ok(Settings { pipeline: cfg, threshold_px, seed: self.seed.or(file.seed).unwrap_or(0) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epsilon": 0.005, "step_size": 0.004, "seed": 9}"#).unwrap();
        let flags = GlobalFlags { config: Some(path), epsilon: Some(0.002), ..Default::default() };
        let s = flags.resolve().unwrap();
        assert_eq!(s.pipeline.exec.policy.eps_trans, 0.002);
        assert_eq!(s.pipeline.exec.policy.step_size, 0.004);
        assert_eq!(s.seed, 9);
        assert_eq!(s.threshold_px, DEFAULT_THRESHOLD_PX);
        assert_eq!(s.pipeline.parser.tolerance, PipelineConfig::default().parser.tolerance);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epsilonn": 1}"#).unwrap();
        let err = GlobalFlags { config: Some(path), ..Default::default() }.resolve().unwrap_err();
        assert_eq!(err.code, "InvalidConfig");
    }

    #[test]
    fn inline_palette() {
        let flags = GlobalFlags { palette: Some(r#"[{"rgb":[255,0,0],"ordinal":1}]"#.into()), ..Default::default() };
        assert_eq!(flags.resolve().unwrap().pipeline.palette.len(), 1);
    }
}
