//! Experiment configuration: JSON with documented defaults, cross-field
//! validation, and a canonical hash that is stable under key reordering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PourError, Result};
use crate::model::{Optimizer, TrainConfig};
use crate::unlearn::{DirectionSource, UnlearnConfig, UnlearnVariant};

fn default_sigma() -> f64 {
    0.05
}
fn default_samples() -> usize {
    100
}
fn default_hidden() -> usize {
    32
}
fn default_train_steps() -> usize {
    2000
}
fn default_train_step_size() -> f64 {
    0.5
}
fn default_unlearn_steps() -> usize {
    500
}
fn default_unlearn_step_size() -> f64 {
    0.01
}
fn default_clip() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_optimizer() -> Optimizer {
    Optimizer::GradientDescent
}
fn default_variant() -> UnlearnVariant {
    UnlearnVariant::PourP
}
fn default_direction() -> DirectionSource {
    DirectionSource::HeadColumn
}
fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    /// Penultimate feature dimension; `None` resolves to the ambient dim.
    #[serde(default)]
    pub feature_dim: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> ModelSection {
        ModelSection {
            hidden_dim: default_hidden(),
            feature_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_train_steps")]
    pub steps: usize,
    #[serde(default = "default_train_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
}

impl Default for TrainSection {
    fn default() -> TrainSection {
        TrainSection {
            steps: default_train_steps(),
            step_size: default_train_step_size(),
            batch_size: None,
            optimizer: default_optimizer(),
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            step_size: self.step_size,
            batch_size: self.batch_size,
            seed,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnSection {
    #[serde(default = "default_variant")]
    pub variant: UnlearnVariant,
    #[serde(default)]
    pub forget_class: usize,
    #[serde(default = "default_direction")]
    pub direction_source: DirectionSource,
    #[serde(default = "default_unlearn_steps")]
    pub steps: usize,
    #[serde(default = "default_unlearn_step_size")]
    pub step_size: f64,
    #[serde(default = "default_clip")]
    pub ascent_clip: f64,
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for UnlearnSection {
    fn default() -> UnlearnSection {
        UnlearnSection {
            variant: default_variant(),
            forget_class: 0,
            direction_source: default_direction(),
            steps: default_unlearn_steps(),
            step_size: default_unlearn_step_size(),
            ascent_clip: default_clip(),
            checkpoint_every: 0,
        }
    }
}

impl UnlearnSection {
    pub fn to_unlearn_config(&self, seed: u64) -> UnlearnConfig {
        UnlearnConfig {
            forget_class: self.forget_class,
            direction_source: self.direction_source,
            variant: self.variant,
            train: TrainConfig {
                steps: self.steps,
                step_size: self.step_size,
                batch_size: None,
                seed,
                optimizer: Optimizer::GradientDescent,
            },
            ascent_clip: self.ascent_clip,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_true")]
    pub rus_o: bool,
    #[serde(default)]
    pub rus_r: bool,
    #[serde(default)]
    pub rmia: bool,
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub angles: bool,
    /// Projection unlearning leaves the extractor untouched, so its
    /// representation metrics against the original are omitted by
    /// default; set this to compare post-projection features instead.
    #[serde(default)]
    pub cka_after_projection: bool,
}

impl Default for MetricsSection {
    fn default() -> MetricsSection {
        MetricsSection {
            rus_o: true,
            rus_r: false,
            rmia: false,
            bounds: false,
            angles: false,
            cka_after_projection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

impl Default for OutputSection {
    fn default() -> OutputSection {
        OutputSection {
            dir: default_out_dir(),
            format: default_format(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "C")]
    pub class_count: usize,
    #[serde(rename = "d")]
    pub ambient_dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_samples")]
    pub samples_per_class: usize,
    #[serde(default = "default_samples")]
    pub test_samples_per_class: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub unlearn: UnlearnSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Minimal config with defaults for everything but geometry.
    pub fn minimal(class_count: usize, ambient_dim: usize, sigma: f64) -> ExperimentConfig {
        ExperimentConfig {
            class_count,
            ambient_dim,
            sigma,
            samples_per_class: default_samples(),
            test_samples_per_class: default_samples(),
            seed: 0,
            model: ModelSection::default(),
            train: TrainSection::default(),
            unlearn: UnlearnSection::default(),
            metrics: MetricsSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Resolve dependent defaults, then check every cross-field
    /// constraint the constituent stages rely on.
    pub fn resolve(&mut self) -> Result<()> {
        if self.model.feature_dim.is_none() {
            self.model.feature_dim = Some(self.ambient_dim);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(PourError::InvalidConfig(
                "class count C must be at least 2".into(),
            ));
        }
        if self.ambient_dim < self.class_count - 1 {
            return Err(PourError::InvalidConfig(format!(
                "ambient_dim below C-1: d = {} but C - 1 = {}",
                self.ambient_dim,
                self.class_count - 1
            )));
        }
        if self.sigma < 0.0 {
            return Err(PourError::InvalidConfig("sigma must be nonnegative".into()));
        }
        if self.samples_per_class == 0 || self.test_samples_per_class == 0 {
            return Err(PourError::InvalidConfig(
                "samples_per_class must be at least 1".into(),
            ));
        }
        if self.model.hidden_dim == 0 {
            return Err(PourError::InvalidConfig(
                "hidden_dim must be at least 1".into(),
            ));
        }
        if let Some(p) = self.model.feature_dim {
            if p == 0 {
                return Err(PourError::InvalidConfig(
                    "feature_dim must be at least 1".into(),
                ));
            }
        }
        if self.train.steps == 0 || self.unlearn.steps == 0 {
            return Err(PourError::InvalidConfig("steps must be at least 1".into()));
        }
        if self.train.step_size <= 0.0 || self.unlearn.step_size <= 0.0 {
            return Err(PourError::InvalidConfig(
                "step_size must be positive".into(),
            ));
        }
        if self.unlearn.forget_class >= self.class_count {
            return Err(PourError::InvalidConfig(format!(
                "forget_class {} out of range for C = {}",
                self.unlearn.forget_class, self.class_count
            )));
        }
        if self.unlearn.ascent_clip <= 0.0 {
            return Err(PourError::InvalidClip(self.unlearn.ascent_clip));
        }
        if self.metrics.bounds && self.class_count < 3 {
            return Err(PourError::InvalidConfig(
                "bound verification needs C >= 3 so the retained side is a mixture".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.model.feature_dim.unwrap_or(self.ambient_dim)
    }

    /// Seeds for the pipeline stages, derived deterministically from the
    /// base seed so stages stay independent.
    pub fn stage_seed(&self, stage_index: u64) -> u64 {
        self.seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(stage_index)
    }

    /// Hex SHA-256 of the canonicalized (sorted-key) JSON encoding.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = canonical_string(&value);
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn canonical_string(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| {
                    format!(
                        "{}:{}",
                        serde_json::Value::String(k.clone()),
                        canonical_string(&map[k])
                    )
                })
                .collect();
            format!("{{{}}}", body.join(","))
        }
        serde_json::Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_string).collect();
            format!("[{}]", body.join(","))
        }
        other => other.to_string(),
    }
}

/// Parse, resolve defaults, and validate a JSON config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = serde_json::from_str(text)?;
    config.resolve()?;
    Ok(config)
}
