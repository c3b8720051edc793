//! Library side of the `shelfpick` command: batch evaluation, plan reports
//! and SVG rendering.

pub mod batch;
pub mod plan;
pub mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use shelfpick::sim::{NoiseConfig, PickConfig};
use shelfpick::wrench::DisturbanceSet;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input, unwritable output.
    Input(anyhow::Error),
    /// The inputs are fine but no plan exists.
    Infeasible(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Infeasible(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(e) => write!(f, "{e:#}"),
            Self::Infeasible(msg) => f.write_str(msg),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Input(e)
    }
}

/// Planner parameters exposed on the command line and in batch configs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub mu: Option<f64>,
    pub n_max: Option<f64>,
    pub tau_max: Option<f64>,
    pub sigma_samples: Option<f64>,
}

impl Tuning {
    pub fn config(&self, noise: NoiseConfig, declutter: bool) -> anyhow::Result<PickConfig> {
        let mut cfg = PickConfig {
            noise,
            declutter,
            ..PickConfig::default()
        };
        if let Some(mu) = self.mu {
            cfg.grasp.mu = mu;
        }
        if let Some(n) = self.n_max {
            cfg.grasp.n_max = n;
        }
        if let Some(s) = self.sigma_samples {
            cfg.grasp.sigma = s;
        }
        if let Some(t) = self.tau_max {
            cfg.plan.disturbance = DisturbanceSet::gravity(t);
        }
        cfg.grasp.validate().map_err(|e| anyhow::anyhow!("invalid grasp parameters: {e}"))?;
        cfg.plan
            .disturbance
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid disturbance set: {e}"))?;
        anyhow::ensure!(noise.is_valid(), "noise sigma must be >= 0 and dropout in [0, 1]");
        Ok(cfg)
    }
}

/// Reads a scene file, reporting the line and column of JSON errors.
pub fn read_scene(path: &std::path::Path) -> anyhow::Result<shelfpick::sim::Scene> {
    use anyhow::Context;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    anyhow::ensure!(!text.trim().is_empty(), "{}: empty scene file", path.display());
    shelfpick::sim::Scene::from_json(&text).with_context(|| format!("{}: invalid scene", path.display()))
}
