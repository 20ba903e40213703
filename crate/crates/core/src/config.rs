//! Engine configuration: every tunable in one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::ThresholdConfig;
use crate::feedback::FeedbackConfig;
use crate::fusion::FusionConfig;
use crate::heatmap::HeatmapConfig;
use crate::params::ReportConfig;
use crate::signal::ConditioningConfig;
use crate::types::{CalibrationProfile, RegionMap};

/// Environment variable naming a config file when none is given explicitly.
pub const CONFIG_ENV: &str = "GAITCORE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasEstimation {
    pub enabled: bool,
    /// Leading frames assumed stationary.
    pub frames: usize,
}

impl Default for BiasEstimation {
    fn default() -> Self {
        Self {
            enabled: true,
            frames: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub calibration: CalibrationProfile,
    pub region_map: RegionMap,
    pub conditioning: ConditioningConfig,
    pub bias_estimation: BiasEstimation,
    pub thresholds: ThresholdConfig,
    pub fusion: FusionConfig,
    pub report: ReportConfig,
    pub feedback: FeedbackConfig,
    pub heatmap: HeatmapConfig,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Explicit path, else `GAITCORE_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::from_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.calibration.validate().map_err(|e| invalid(&e))?;
        self.conditioning.validate().map_err(|e| invalid(&e))?;
        self.thresholds.validate().map_err(|e| invalid(&e))?;
        self.fusion.validate().map_err(|e| invalid(&e))?;
        self.report.stability.validate().map_err(|e| invalid(&e))?;
        self.feedback.validate().map_err(|e| invalid(&e))?;
        if !(self.report.contact_area_cm2 > 0.0) {
            return Err(ConfigError::Invalid("contact_area_cm2 must be > 0".into()));
        }
        Ok(())
    }

    /// Pressure averaging threshold: explicit, else the foot-off threshold.
    pub fn pressure_min_load_n(&self) -> f64 {
        self.report
            .pressure_min_load_n
            .unwrap_or(self.thresholds.off_threshold * self.calibration.body_weight_n)
    }
}
