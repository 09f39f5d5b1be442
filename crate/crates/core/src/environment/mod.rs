//! Navigation task: spaces, observations, rewards, scenarios and episodes.

pub mod centerline;
pub mod episode;
pub mod observation;
pub mod path;
pub mod reward;
pub mod scenario;
pub mod spaces;

pub use centerline::{extract_centerline, Opening};
pub use episode::{detect_events, StepContext, run_episode, run_from, Environment, EpisodeResult, Outcome, Policy, SimRng, StepOutcome, Transition};
pub use observation::{Observation, RayFan};
pub use reward::{reward_parts, step_reward, RewardConfig, RewardParts, StepEvent};
pub use scenario::{toy, Scenario, ScenarioFile};
pub use spaces::{Spaces, TargetRegion};
