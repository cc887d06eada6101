//! Experiment configuration: JSON schema, parsing, validation with field
//! paths, and the defaulting rules echoed into the run artifacts.

use crate::flow::FlowConfig;
use crate::geometry::ShapeSpec;
use crate::monitors::DEFAULT_Z_IMAGES;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
    #[error("VALIDATION_ERROR({field}): {msg}")]
    Validation { field: String, msg: String },
    #[error("io error reading {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), msg: msg.into() }
}

/// Options for the rescaling stage of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescalingOptions {
    /// Start of the rescaled window. Defaults to the first checkpoint time
    /// after ten steps when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Encloser radii as multiples of the slice's max |x~|.
    #[serde(default = "default_factors")]
    pub encloser_factors: Vec<f64>,
    /// Absolute encloser radii; radii below max |x~| are reported as
    /// non-enclosing rather than failing the run.
    #[serde(default)]
    pub encloser_radii: Vec<f64>,
}

fn default_factors() -> Vec<f64> {
    vec![1.0, 1.2]
}

impl Default for RescalingOptions {
    fn default() -> Self {
        Self { sigma: None, encloser_factors: default_factors(), encloser_radii: vec![] }
    }
}

/// Options for the elliptic-regularization stage (sphere fixtures only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalOptions {
    pub sigma: f64,
    #[serde(default = "default_eps_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(rename = "M")]
    pub m: usize,
}

fn default_eps_ladder() -> Vec<f64> {
    crate::arrival::DEFAULT_EPS_LADDER.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub flow: FlowConfig,
    /// Mean-curvature thresholds for the convexity and gradient ladders;
    /// exactly four rungs, increasing.
    pub ladder: Vec<f64>,
    #[serde(default = "default_z_images")]
    pub z_images: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescaling: Option<RescalingOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<ArrivalOptions>,
    /// Seed for randomized perturbation fixtures in the property report.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_z_images() -> usize {
    DEFAULT_Z_IMAGES
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must be nonempty"));
        }
        let f = &self.flow;
        if f.a1 + f.a2 <= 0.0 {
            return Err(invalid("a1+a2", format!("a1 + a2 = {} must be positive", f.a1 + f.a2)));
        }
        if !(f.cfl_geom > 0.0 && f.cfl_geom < 1.0) {
            return Err(invalid("flow.cfl_geom", "must lie in (0, 1)"));
        }
        if !(f.cfl_curv > 0.0 && f.cfl_curv < 1.0) {
            return Err(invalid("flow.cfl_curv", "must lie in (0, 1)"));
        }
        if f.n == 0 {
            return Err(invalid("flow.n", "dimension must be at least 1"));
        }
        if f.intervals < crate::geometry::MIN_GRID {
            return Err(invalid("flow.N", "grid too coarse"));
        }
        if let Some(a) = f.stop_amax {
            if !(a > 0.0) {
                return Err(invalid("flow.stop_Amax", "must be positive"));
            }
        }
        if let Some(r) = f.stop_rmin {
            if !(r > 0.0) {
                return Err(invalid("flow.stop_rmin", "must be positive"));
            }
        }
        if !(f.t_max >= 0.0) {
            return Err(invalid("flow.t_max", "must be nonnegative"));
        }
        if f.monitor_every == 0 {
            return Err(invalid("flow.monitor_every", "must be at least 1"));
        }
        if self.ladder.len() != 4 {
            return Err(invalid("ladder", format!("needs exactly 4 rungs, got {}", self.ladder.len())));
        }
        if self.ladder[0] <= 0.0 || !self.ladder.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("ladder", "must be positive and increasing"));
        }
        if self.z_images < 2 {
            return Err(invalid("z_images", "needs at least 2 azimuthal images"));
        }
        if let Some(r) = &self.rescaling {
            if r.encloser_factors.iter().any(|&x| x < 1.0) {
                return Err(invalid("rescaling.encloser_factors", "factors below 1 cannot enclose"));
            }
            if let Some(s) = r.sigma {
                if !(s > 0.0) {
                    return Err(invalid("rescaling.sigma", "must be positive"));
                }
            }
        }
        if let Some(a) = &self.arrival {
            if !matches!(f.shape, ShapeSpec::Sphere { .. }) {
                return Err(invalid("arrival", "arrival stage needs a sphere fixture"));
            }
            if !(a.sigma > 0.0) {
                return Err(invalid("arrival.sigma", "must be positive"));
            }
            if a.eps_ladder.is_empty() || a.eps_ladder.iter().any(|&e| !(e > 0.0)) {
                return Err(invalid("arrival.eps_ladder", "must be positive"));
            }
            if !a.eps_ladder.windows(2).all(|w| w[1] < w[0]) {
                return Err(invalid("arrival.eps_ladder", "must be strictly decreasing"));
            }
            if a.m < 16 {
                return Err(invalid("arrival.M", "grid too coarse"));
            }
        }
        Ok(())
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
