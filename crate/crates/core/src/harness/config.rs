//! Experiment configuration, read from TOML with every key optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::codec::hex_digest;
use crate::error::{Error, Result};
use crate::metaset::{BackgroundConfig, GlyphSeedConfig, SplitRatio};
use crate::predictors::NeuralConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rng_seed: u64,
    /// Number of synthetic sample sets in the meta set.
    pub meta_size: usize,
    /// Held-out synthetic sets for the method comparison.
    pub test_sets: usize,
    /// Sets per variant in the robustness suite.
    pub robustness_sets_per_variant: usize,
    pub taus: Vec<f64>,
    pub out_dir: PathBuf,
    pub split: SplitRatio,
    /// Glyph seed the sample sets are synthesized from; its image count is
    /// the sample-set size.
    pub seed: GlyphSeedConfig,
    /// Clean glyph set the classifier is trained on.
    pub reference: GlyphSeedConfig,
    pub classifier_seed: u64,
    pub neural_seed: u64,
    pub classifier: TrainConfig,
    pub backgrounds: BackgroundConfig,
    pub neural: NeuralConfig,
    pub ablation: AblationConfig,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub meta_sizes: Vec<usize>,
    pub set_sizes: Vec<usize>,
}

/// Limits checked after `eval` and `ablate`; unset keys are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Upper bound on the Spearman correlation between fd and accuracy.
    pub max_rho: Option<f64>,
    /// Upper bound on the neural RMSE over the test sets, in accuracy units.
    pub max_neural_rmse: Option<f64>,
    pub neural_beats_linear: Option<bool>,
    /// Absolute error bound for the robustness census.
    pub robustness_max_error: Option<f64>,
    /// Fraction of robustness sets that must meet `robustness_max_error`.
    pub robustness_min_fraction: Option<f64>,
    pub max_linear_spread: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rng_seed: 11,
            meta_size: 200,
            test_sets: 40,
            robustness_sets_per_variant: 8,
            taus: vec![0.7, 0.8, 0.9],
            out_dir: PathBuf::from("autoeval-out"),
            split: SplitRatio::default(),
            seed: GlyphSeedConfig::default(),
            reference: GlyphSeedConfig {
                per_class: 200,
                seed: 1,
                ..GlyphSeedConfig::default()
            },
            classifier_seed: 3,
            neural_seed: 5,
            classifier: TrainConfig::default(),
            backgrounds: BackgroundConfig::default(),
            neural: NeuralConfig::default(),
            ablation: AblationConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            meta_sizes: vec![25, 50, 100, 200],
            set_sizes: vec![100, 250, 500],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hash of the canonical TOML rendering, excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self {
            out_dir: PathBuf::new(),
            ..self.clone()
        };
        Ok(hex_digest(canonical.to_toml()?.as_bytes()))
    }

    pub fn set_size(&self) -> usize {
        self.seed.image_count()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        if self.meta_size < 3 {
            return Err(Error::Config(format!("meta_size must be at least 3, got {}", self.meta_size)));
        }
        positive("test_sets", self.test_sets)?;
        positive("robustness_sets_per_variant", self.robustness_sets_per_variant)?;
        if self.split.train == 0 || self.split.val == 0 {
            return Err(Error::Config("both split proportions must be positive".into()));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("tau {t} outside (0, 1)")));
        }
        self.seed.validate()?;
        self.reference.validate()?;
        if self.seed.classes != self.reference.classes
            || self.seed.height != self.reference.height
            || self.seed.width != self.reference.width
        {
            return Err(Error::Config("seed and reference sets must share classes and image size".into()));
        }
        let t = &self.classifier;
        if t.hidden == 0 || t.epochs == 0 || t.batch_size == 0 || !(t.learning_rate > 0.0) {
            return Err(Error::Config("classifier sizes and learning rate must be positive".into()));
        }
        self.neural.validate()?;
        if !self.backgrounds.procedural && self.backgrounds.directory.is_none() {
            return Err(Error::Config(
                "procedural backgrounds are disabled and no background directory is set".into(),
            ));
        }
        for &m in &self.ablation.meta_sizes {
            if m < 3 {
                return Err(Error::Config(format!("ablation meta size {m} must be at least 3")));
            }
        }
        for &s in &self.ablation.set_sizes {
            if s < 2 || s > self.set_size() {
                return Err(Error::Config(format!(
                    "ablation set size {s} must be in 2..={}",
                    self.set_size()
                )));
            }
        }
        if let Some(f) = self.thresholds.robustness_min_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("robustness_min_fraction {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}
