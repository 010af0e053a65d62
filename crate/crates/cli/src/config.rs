//! Pipeline configuration: JSON file, then `TOUCHGRID_` environment overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use touchgrid::featgen::FeatGenConfig;
use touchgrid::gbdt::TrainConfig;
use touchgrid::hashing::json_hash;
use touchgrid::retrain::BundleConfig;
use touchgrid::select::{RfeStep, SampleSpec, SearchSpace, SplitSpec};

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "TOUCHGRID_";
/// Environment variable naming a config file; not treated as an override.
pub const ENV_CONFIG: &str = "TOUCHGRID_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfeOptions {
    pub schedule: Vec<RfeStep>,
    pub tolerance: f64,
    pub min_features: usize,
    pub n_folds: usize,
}

impl Default for RfeOptions {
    fn default() -> Self {
        Self { schedule: vec![RfeStep::DropBottomGainFraction(0.5); 20], tolerance: 0.001, min_features: 1, n_folds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrainOptions {
    pub bundle: BundleConfig,
    pub patience: usize,
}

impl Default for RetrainOptions {
    fn default() -> Self {
        Self { bundle: BundleConfig::default(), patience: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeOptions {
    pub bind: String,
    pub port: u16,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { bind: "127.0.0.1".into(), port: 8080 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub featgen: FeatGenConfig,
    pub train: TrainConfig,
    pub search: SearchSpace,
    pub split: SplitSpec,
    pub rfe: RfeOptions,
    pub sample: SampleSpec,
    pub retrain: RetrainOptions,
    pub serve: ServeOptions,
    /// Median-smoothing window applied to thresholded predictions.
    pub smooth_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            featgen: FeatGenConfig::default(),
            train: TrainConfig::default(),
            search: SearchSpace::default(),
            split: SplitSpec::default(),
            rfe: RfeOptions::default(),
            sample: SampleSpec::default(),
            retrain: RetrainOptions::default(),
            serve: ServeOptions::default(),
            smooth_window: 5,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> CliResult<Self> {
        let mut value = match path {
            Some(p) => {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_slice::<Value>(&bytes)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        // Fill defaults first so overrides can be checked against known keys.
        let base: PipelineConfig =
            serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        value = serde_json::to_value(&base).map_err(|e| CliError::Internal(e.to_string()))?;
        let mut overrides: Vec<(String, String)> =
            env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != ENV_CONFIG).collect();
        overrides.sort();
        for (key, raw) in overrides {
            apply_override(&mut value, &key[ENV_PREFIX.len()..], &raw)?;
        }
        let cfg: PipelineConfig =
            serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.featgen.validate()?;
        self.train.validate()?;
        if self.smooth_window != 0 && self.smooth_window.is_multiple_of(2) {
            return Err(CliError::Usage(format!("smooth_window {} must be odd (or 0 to disable)", self.smooth_window)));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }

    pub fn smooth(&self) -> Option<usize> {
        (self.smooth_window > 1).then_some(self.smooth_window)
    }
}

/// `TRAIN__LEARNING_RATE=0.05` sets `train.learning_rate`. Values parse as
/// JSON when possible and fall back to strings.
fn apply_override(root: &mut Value, key: &str, raw: &str) -> CliResult<()> {
    let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
    let mut node = root;
    for (i, seg) in path.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("{ENV_PREFIX}{key}: {seg} is not a section")))?;
        let Some(child) = obj.get_mut(seg) else {
            return Err(CliError::Usage(format!("{ENV_PREFIX}{key}: unknown config key {seg:?}")));
        };
        if i + 1 == path.len() {
            *child = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            return Ok(());
        }
        node = child;
    }
    Ok(())
}
