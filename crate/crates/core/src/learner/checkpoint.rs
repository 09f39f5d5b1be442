//! Training checkpoints: network shapes and row-major weights, optimizer
//! moments, curriculum and RNG state, stored as JSON.

use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::curriculum::CurriculumState;
use super::losses::CuriosityNets;
use super::policy::ActionScale;
use crate::environment::SimRng;
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp};

pub const CHECKPOINT_FORMAT: &str = "cathnav-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    /// Decimal, since JSON numbers cannot hold a u128 exactly.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &SimRng) -> Self {
        Self { seed: hex::encode(rng.get_seed()), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<SimRng> {
        let bad = || Error::Schema("corrupt rng state in checkpoint".into());
        let bytes = hex::decode(&self.seed).map_err(|_| bad())?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| bad())?;
        let mut rng = SimRng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub policy: Adam<f64>,
    pub value: Adam<f64>,
    pub disc: Adam<f64>,
    pub encoder: Adam<f64>,
    pub forward: Adam<f64>,
    pub inverse: Adam<f64>,
}

impl Optimizers {
    pub fn new(policy: &Mlp<f64>, value: &Mlp<f64>, disc: &Mlp<f64>, cur: &CuriosityNets, lr: f64) -> Self {
        Self {
            policy: Adam::new(policy.num_params(), lr),
            value: Adam::new(value.num_params(), lr),
            disc: Adam::new(disc.num_params(), lr),
            encoder: Adam::new(cur.encoder.num_params(), lr),
            forward: Adam::new(cur.forward.num_params(), lr),
            inverse: Adam::new(cur.inverse.num_params(), lr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub config_hash: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub schema_hash: String,
    pub iteration: usize,
    pub env_steps: usize,
    pub scale: ActionScale,
    pub policy: Mlp<f64>,
    pub value: Mlp<f64>,
    pub disc: Mlp<f64>,
    pub curiosity: CuriosityNets,
    pub optimizers: Optimizers,
    pub curriculum: CurriculumState,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse { offset: 0, message: format!("checkpoint: {e}") })?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        if ck.config.hash() != ck.config_hash {
            return Err(Error::Schema("checkpoint config hash does not match its config".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
