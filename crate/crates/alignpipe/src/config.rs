use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synthmotion::{AppearanceRamp, CorruptParams, PerturbBounds};

use crate::{PipelineError, Result};

/// Environment variable overriding `dataset_root`.
pub const DATA_ROOT_ENV: &str = "ALIGNPIPE_DATA_ROOT";

/// Where composed flows come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSource {
    /// Built-in pyramidal estimator over the morph chain.
    BuiltinEstimator,
    /// Stepwise `.flo` files computed by an external matcher.
    ExternalFloDir,
    /// Analytic ground-truth step flows (oracle runs).
    AnalyticGt,
    /// The stored corrupted flow stands in for the composed flow.
    CorruptedGt,
}

/// Pixel domain used by EPE/ECC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Intersection of the validity masks (default).
    Masked,
    /// Every pixel.
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub max_rotation_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub max_translate_frac: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            max_rotation_deg: 5.0,
            scale_min: 0.95,
            scale_max: 1.05,
            max_translate_frac: 0.05,
        }
    }
}

impl BoundsConfig {
    pub fn to_bounds(&self) -> PerturbBounds {
        PerturbBounds {
            max_rotation: self.max_rotation_deg.to_radians(),
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            max_translate_frac: self.max_translate_frac,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub levels: usize,
    pub iterations: usize,
    pub window_radius: usize,
    pub min_eigenvalue: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = stepflow::EstimatorConfig::default();
        Self {
            levels: d.levels,
            iterations: d.iterations,
            window_radius: d.window_radius,
            min_eigenvalue: d.min_eigenvalue,
        }
    }
}

impl EstimatorSection {
    pub fn to_config(&self) -> stepflow::EstimatorConfig {
        stepflow::EstimatorConfig {
            levels: self.levels,
            iterations: self.iterations,
            window_radius: self.window_radius,
            min_eigenvalue: self.min_eigenvalue,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerSection {
    /// `desk`, `full`, or `tiny`.
    pub preset: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Square crop taken from each pair for training; must divide by 32.
    pub crop: usize,
    pub crops_per_pair: usize,
    /// Fraction of training inputs drawn from stored corrupted flows; the
    /// rest use chain-composed flows when present.
    pub mix_corrupted: f64,
}

impl Default for RefinerSection {
    fn default() -> Self {
        Self {
            preset: "desk".into(),
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 6,
            crop: 64,
            crops_per_pair: 4,
            mix_corrupted: 0.5,
        }
    }
}

impl RefinerSection {
    pub fn to_config(&self, seed: u64) -> Result<refiner::RefinerConfig> {
        let base = match self.preset.as_str() {
            "desk" => refiner::RefinerConfig::desk(),
            "full" => refiner::RefinerConfig::full(),
            "tiny" => refiner::RefinerConfig::tiny(),
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown refiner preset {other:?} (expected desk|full|tiny)"
                )))
            }
        };
        Ok(refiner::RefinerConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            ..base
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptSection {
    pub amplitude: f64,
    pub cells: usize,
    pub drift: f64,
}

impl Default for CorruptSection {
    fn default() -> Self {
        Self {
            amplitude: 4.0,
            cells: 8,
            drift: 2.0,
        }
    }
}

impl CorruptSection {
    pub fn to_params(&self) -> CorruptParams {
        CorruptParams {
            amplitude: self.amplitude,
            cells: self.cells,
            drift: [(-self.drift, self.drift), (-self.drift, self.drift)],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AppearanceSection {
    pub enabled: bool,
    pub amplitude: f64,
    pub cells: usize,
}

impl Default for AppearanceSection {
    fn default() -> Self {
        Self {
            enabled: true,
            amplitude: 0.03,
            cells: 4,
        }
    }
}

impl AppearanceSection {
    pub fn to_ramp(&self) -> Option<AppearanceRamp> {
        self.enabled.then_some(AppearanceRamp {
            amplitude: self.amplitude,
            cells: self.cells,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// The single pipeline configuration, read from a TOML file. CLI flags of
/// the same name override individual keys; `ALIGNPIPE_DATA_ROOT` overrides
/// the dataset root.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    pub work_dir: PathBuf,
    pub seed: u64,
    /// Morph chain length.
    pub k: usize,
    pub flow_source: FlowSource,
    pub metric_mask_policy: MaskPolicy,
    /// Worker threads; 0 picks the core count.
    pub jobs: usize,
    pub bounds: BoundsConfig,
    pub estimator: EstimatorSection,
    pub refiner: RefinerSection,
    pub corrupt: CorruptSection,
    pub appearance: AppearanceSection,
    pub split: SplitSection,
    pub external_flow_dir: Option<PathBuf>,
    pub pred_mask_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("data"),
            work_dir: PathBuf::from("work"),
            seed: 7,
            k: 5,
            flow_source: FlowSource::BuiltinEstimator,
            metric_mask_policy: MaskPolicy::Masked,
            jobs: 0,
            bounds: BoundsConfig::default(),
            estimator: EstimatorSection::default(),
            refiner: RefinerSection::default(),
            corrupt: CorruptSection::default(),
            appearance: AppearanceSection::default(),
            split: SplitSection::default(),
            external_flow_dir: None,
            pred_mask_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Toml(format!("{}: {e}", path.display())))?;
        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            cfg.dataset_root = PathBuf::from(root);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(PipelineError::Config("k must be >= 1".into()));
        }
        let s = &self.split;
        if s.train < 0.0 || s.val < 0.0 || s.test < 0.0 || s.train + s.val + s.test > 1.0 + 1e-9 {
            return Err(PipelineError::Config(format!(
                "split fractions ({}, {}, {}) invalid",
                s.train, s.val, s.test
            )));
        }
        if !self.refiner.crop.is_multiple_of(32) || self.refiner.crop == 0 {
            return Err(PipelineError::Config(format!(
                "refiner crop {} must be a positive multiple of 32",
                self.refiner.crop
            )));
        }
        if !(0.0..=1.0).contains(&self.refiner.mix_corrupted) {
            return Err(PipelineError::Config(
                "refiner mix_corrupted must be in [0,1]".into(),
            ));
        }
        if self.flow_source == FlowSource::ExternalFloDir && self.external_flow_dir.is_none() {
            return Err(PipelineError::Config(
                "flow_source = external_flo_dir needs external_flow_dir".into(),
            ));
        }
        self.bounds
            .to_bounds()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Canonical serialized form embedded in run manifests.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Toml(e.to_string()))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.work_dir.join("manifest.jsonl")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.work_dir.join("checkpoints").join("refiner.rfnc")
    }

    pub fn train_state_path(&self) -> PathBuf {
        self.work_dir.join("checkpoints").join("train_state.bin")
    }
}
