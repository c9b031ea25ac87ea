//! Flat run configuration, stored as TOML next to every output.

use std::fs;
use std::path::Path;

use dds_core::{
    Activation, BehaviorParams, MaskMode, ModelConfig, ModelKind, SimConfig, TrainConfig,
    UpdateMode, UtilityFeedback,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::PadScope;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Ds,
}

/// Every option of every command. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub model: ModelKind,
    pub activation: Activation,
    pub utility_feedback: UtilityFeedback,
    pub beta_min: f64,

    pub days: usize,
    pub width: usize,
    pub exp_scale: f64,
    pub gen_a1: f64,
    pub gen_a2: f64,
    pub gen_b1: f64,
    pub gen_b2: f64,
    pub gen_lambda0: f64,
    pub gen_beta0: f64,
    pub sim_noise_std_eps: f64,
    pub sim_noise_std_eta: f64,

    pub drivers: usize,
    /// Leading share of days used for training. Ingest defaults to 0.4; train
    /// falls back to the dataset's stored split, then to every day.
    pub train_fraction: Option<f64>,
    pub pad_scope: PadScope,

    pub learning_rate: f64,
    /// One training run per entry.
    pub samples: Vec<usize>,
    pub epochs: usize,
    pub temperature: f64,
    pub noise_std_eps: f64,
    pub noise_std_eta: f64,
    pub update_mode: UpdateMode,
    pub mask_mode: MaskMode,
    pub p_min: f64,
    pub train_initial_state: bool,
    pub freeze_noise_per_epoch: bool,
    pub init_a1: f64,
    pub init_a2: f64,
    pub init_b1: f64,
    pub init_b2: f64,
    /// Defaults to the mean daily total utility of the training days.
    pub init_lambda0: Option<f64>,
    pub init_beta0: f64,
    pub baseline: Option<Baseline>,
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.4;

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let train = TrainConfig::default();
        let model = ModelConfig::default();
        Self {
            seed: 0,
            model: model.kind,
            activation: model.activation,
            utility_feedback: model.utility_feedback,
            beta_min: model.beta_min,
            days: sim.days,
            width: sim.width,
            exp_scale: sim.exp_scale,
            gen_a1: sim.generator.a1,
            gen_a2: sim.generator.a2,
            gen_b1: sim.generator.b1,
            gen_b2: sim.generator.b2,
            gen_lambda0: sim.generator.lambda0,
            gen_beta0: sim.generator.beta0,
            sim_noise_std_eps: sim.noise_std_eps,
            sim_noise_std_eta: sim.noise_std_eta,
            drivers: 10,
            train_fraction: None,
            pad_scope: PadScope::PerDriver,
            learning_rate: train.learning_rate,
            samples: vec![train.samples],
            epochs: train.epochs,
            temperature: train.temperature,
            noise_std_eps: train.noise_std_eps,
            noise_std_eta: train.noise_std_eta,
            update_mode: train.update_mode,
            mask_mode: train.mask_mode,
            p_min: train.p_min,
            train_initial_state: train.train_initial_state,
            freeze_noise_per_epoch: train.freeze_noise_per_epoch,
            init_a1: train.init.a1,
            init_a2: train.init.a2,
            init_b1: train.init.b1,
            init_b2: train.init.b2,
            init_lambda0: None,
            init_beta0: train.init.beta0,
            baseline: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed {} exceeds {}",
                self.seed,
                i64::MAX
            )));
        }
        if self.drivers == 0 {
            return Err(Error::Config("drivers must be >= 1".into()));
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!(
                    "train_fraction {f} must lie in (0, 1)"
                )));
            }
        }
        if self.samples.is_empty() || self.samples.contains(&0) {
            return Err(Error::Config(
                "samples must be a non-empty list of positive counts".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if let Some(l) = self.init_lambda0 {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("init_lambda0 {l} must be >= 0")));
            }
        }
        self.sim_config().validate()?;
        self.train_config(self.samples[0], self.init_lambda0.unwrap_or(0.0))
            .validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            beta_min: self.beta_min,
            activation: self.activation,
            utility_feedback: self.utility_feedback,
            kind: self.model,
        }
    }

    pub fn generator(&self) -> BehaviorParams {
        BehaviorParams {
            a1: self.gen_a1,
            a2: self.gen_a2,
            b1: self.gen_b1,
            b2: self.gen_b2,
            lambda0: self.gen_lambda0,
            beta0: self.gen_beta0,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            days: self.days,
            width: self.width,
            exp_scale: self.exp_scale,
            generator: self.generator(),
            noise_std_eps: self.sim_noise_std_eps,
            noise_std_eta: self.sim_noise_std_eta,
            model: self.model_config(),
            seed: self.seed,
        }
    }

    pub fn train_config(&self, samples: usize, init_lambda0: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            samples,
            epochs: self.epochs,
            temperature: self.temperature,
            noise_std_eps: self.noise_std_eps,
            noise_std_eta: self.noise_std_eta,
            seed: self.seed,
            update_mode: self.update_mode,
            train_initial_state: self.train_initial_state,
            freeze_weights: false,
            freeze_noise_per_epoch: self.freeze_noise_per_epoch,
            mask_mode: self.mask_mode,
            p_min: self.p_min,
            model: self.model_config(),
            init: BehaviorParams {
                a1: self.init_a1,
                a2: self.init_a2,
                b1: self.init_b1,
                b2: self.init_b2,
                lambda0: init_lambda0,
                beta0: self.init_beta0,
            },
        }
    }
}
