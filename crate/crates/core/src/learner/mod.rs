//! Policy learning from demonstrations: PPO with an imitation
//! discriminator, behavioural cloning and curiosity, plus a curriculum over
//! the bend limit.

pub mod buffer;
pub mod checkpoint;
pub mod config;
pub mod curriculum;
pub mod log;
pub mod losses;
pub mod policy;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{total_loss, TrainConfig};
pub use curriculum::{CurriculumConfig, CurriculumState};
pub use policy::{policy_act, ActionScale, LearnedPolicy};
pub use log::IterationLog;
pub use train::{evaluate, Trainer};
