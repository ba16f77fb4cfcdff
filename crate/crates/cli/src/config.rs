//! Run configuration files.

use std::path::Path;

use anyhow::{Context, Result};
use jpt_core::analysis::StlcParams;
use jpt_core::{ModelParams, ObservationSet};
use jpt_core::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

/// Model parameters plus sampler settings, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Trajectory-distance scales; derived from the observations when absent.
    #[serde(default)]
    pub stlc: Option<StlcParams>,
}

impl RunConfig {
    pub fn new(model: ModelParams) -> Self {
        Self {
            model,
            sampler: SamplerConfig::default(),
            stlc: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(jpt_core::Error::from).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sampler.validate()?;
        if let Some(s) = &self.stlc {
            s.validate()?;
        }
        Ok(())
    }

    pub fn stlc_for(&self, obs: &ObservationSet) -> StlcParams {
        self.stlc.unwrap_or_else(|| StlcParams::for_observations(obs))
    }

    /// CLEAR match radius: three observation-noise standard deviations
    /// (largest over dimensions).
    pub fn default_radius(&self) -> f64 {
        let r = &self.model.observation_noise;
        3.0 * (0..r.nrows()).map(|i| r[(i, i)]).fold(0.0, f64::max).sqrt()
    }
}
