use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::RunSettings;
use super::heatmap::HeatmapConfig;
use crate::device::{sample_device, DeviceParams, Noise, VariationConfig};
use crate::error::{Error, Result};
use crate::tuner::SimplexPolicy;

/// Which synthetic device an experiment runs on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceSpec {
    #[default]
    Reference,
    Sampled {
        seed: u64,
        #[serde(default)]
        variation: VariationConfig,
    },
    Explicit {
        params: DeviceParams,
    },
}

impl DeviceSpec {
    pub fn build(&self) -> Result<DeviceParams> {
        match self {
            DeviceSpec::Reference => Ok(DeviceParams::reference()),
            DeviceSpec::Sampled { seed, variation } => sample_device(*seed, variation),
            DeviceSpec::Explicit { params } => {
                params.validate()?;
                Ok(params.clone())
            }
        }
    }
}

/// Start points on the reference device: five beside the double-dot band,
/// then two deep in the single-dot plateau where both plungers are high.
pub const REFERENCE_POINTS: [(f64, f64); 7] = [
    (210.0, 300.0),
    (250.0, 230.0),
    (300.0, 215.0),
    (380.0, 225.0),
    (210.0, 360.0),
    (550.0, 555.0),
    (560.0, 548.0),
];

/// Everything an off-line experiment needs; all randomness is seeded here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub device: DeviceSpec,
    /// Seed of the sensor noise; `None` renders noiseless scans.
    pub noise_seed: Option<u64>,
    pub settings: RunSettings,
    pub points: Vec<(f64, f64)>,
    pub policies: Vec<String>,
    pub heatmap: HeatmapConfig,
    /// Window side in native pixels for fitness landscapes.
    pub landscape_window_px: usize,
    /// Worker threads; `None` uses every core. Results do not depend on it.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            device: DeviceSpec::Reference,
            noise_seed: None,
            settings: RunSettings::default(),
            points: REFERENCE_POINTS.to_vec(),
            policies: vec!["fixed75".into(), "fixed100".into(), "dynamic".into()],
            heatmap: HeatmapConfig::default(),
            landscape_window_px: 30,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        self.policies()?;
        if self.points.is_empty() {
            return Err(Error::Config("no start points configured".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn policies(&self) -> Result<Vec<SimplexPolicy>> {
        if self.policies.is_empty() {
            return Err(Error::Config("no simplex policies configured".into()));
        }
        self.policies
            .iter()
            .map(|p| SimplexPolicy::parse(p))
            .collect()
    }

    pub fn noise(&self) -> Noise {
        self.noise_seed.map_or(Noise::Off, Noise::Seeded)
    }

    /// Run settings with the simplex policy replaced.
    pub fn settings_for(&self, policy: SimplexPolicy) -> RunSettings {
        let mut s = self.settings.clone();
        s.tune.policy = policy;
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse("experiment config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
