use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::curriculum::CurriculumConfig;
use crate::error::{Error, Result};

/// Training hyperparameters. Loss weights combine as
/// `kappa (1 - mu) L_PPO + lambda L_GAIL + kappa mu L_BC + nu L_curiosity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kappa: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    /// Entropy bonus coefficient.
    pub ppo_beta: f64,
    pub ppo_gamma: f64,
    pub gail_gamma: f64,
    pub gae_lambda: f64,
    /// Environment steps for the whole run.
    pub max_steps: usize,
    pub batch_size: usize,
    pub buffer_size: usize,
    /// Passes over the buffer per iteration.
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub curiosity_features: usize,
    pub curiosity_scale: f64,
    /// Weight of the inverse-model loss inside the curiosity loss.
    pub curiosity_inverse_weight: f64,
    /// Train only on demonstrations that reached the target.
    pub successful_demos_only: bool,
    pub seed: u64,
    pub curriculum: CurriculumConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kappa: 0.2,
            lambda: 0.8,
            mu: 0.7,
            nu: 0.02,
            ppo_beta: 5.0e-4,
            ppo_gamma: 0.99,
            gail_gamma: 0.99,
            gae_lambda: 0.95,
            max_steps: 500_000,
            batch_size: 1024,
            buffer_size: 10_240,
            epochs: 3,
            learning_rate: 3e-4,
            clip_ratio: 0.2,
            value_coef: 0.5,
            hidden_units: 64,
            hidden_layers: 2,
            curiosity_features: 32,
            curiosity_scale: 0.01,
            curiosity_inverse_weight: 0.8,
            successful_demos_only: true,
            seed: 0,
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.kappa, self.lambda, self.mu, self.nu];
        if weights.iter().any(|w| !(*w >= 0.0)) || self.mu > 1.0 {
            return Err(Error::config("loss weights must be non-negative and mu in [0, 1]"));
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.buffer_size % self.batch_size != 0 {
            return Err(Error::config(format!(
                "buffer_size ({}) must be a positive multiple of batch_size ({})",
                self.buffer_size, self.batch_size
            )));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.ppo_gamma) || !unit(self.gail_gamma) || !unit(self.gae_lambda) || !unit(self.curiosity_inverse_weight) {
            return Err(Error::config("discount factors and curiosity_inverse_weight must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_ratio > 0.0) || self.epochs == 0 || self.max_steps == 0 {
            return Err(Error::config("learning_rate, clip_ratio, epochs and max_steps must be positive"));
        }
        if self.hidden_units == 0 || self.hidden_layers == 0 || self.curiosity_features == 0 {
            return Err(Error::config("network sizes must be positive"));
        }
        self.curriculum.validate()
    }

    /// Hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_units; self.hidden_layers]
    }
}

/// `kappa (1 - mu) L_PPO + lambda L_GAIL + kappa mu L_BC + nu L_curiosity`.
pub fn total_loss(l_ppo: f64, l_gail: f64, l_bc: f64, l_curiosity: f64, cfg: &TrainConfig) -> f64 {
    cfg.kappa * (1.0 - cfg.mu) * l_ppo + cfg.lambda * l_gail + cfg.kappa * cfg.mu * l_bc + cfg.nu * l_curiosity
}
