//! Gaussian policy head with tanh squashing, and the mapping between
//! normalized actions in `[-1, 1]^3` and catheter actions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::{Observation, Policy, SimRng};
use crate::error::{Error, Result};
use crate::kinematics::{max_bend_at_step, Action, CatheterSpec};
use crate::nn::Mlp;

pub const ACTION_DIM: usize = 3;
pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 0.5;
/// Demonstration targets are kept this far inside the tanh range.
pub const TARGET_LIMIT: f64 = 0.99;

/// Physical size of a unit normalized action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionScale {
    /// rad per unit bend.
    pub bend: f64,
    /// mm per full insertion.
    pub insertion: f64,
}

impl ActionScale {
    /// Bend scale = per-step bound at full insertion under `theta_max`.
    pub fn for_spec(spec: &CatheterSpec<f64>, theta_max: f64) -> Self {
        let relaxed = spec.with_theta_max(theta_max);
        let insertion = spec.max_step();
        Self { bend: max_bend_at_step(&relaxed, insertion).unwrap_or(0.0), insertion }
    }

    /// Bends scale linearly; insertion maps `[-1, 1]` onto `[0, max]`.
    pub fn to_env(&self, a: [f64; ACTION_DIM]) -> Action<f64> {
        Action::new(a[0] * self.bend, a[1] * self.bend, 0.5 * (a[2] + 1.0) * self.insertion)
    }

    pub fn to_normalized(&self, a: &Action<f64>) -> [f64; ACTION_DIM] {
        let c = |x: f64| x.clamp(-1.0, 1.0);
        [c(a.alpha / self.bend), c(a.gamma / self.bend), c(2.0 * a.insertion / self.insertion - 1.0)]
    }
}

/// Mean and (clamped) log standard deviation read from a policy output.
pub fn gaussian_head(out: &[f64]) -> ([f64; ACTION_DIM], [f64; ACTION_DIM]) {
    let mut mean = [0.0; ACTION_DIM];
    let mut log_std = [0.0; ACTION_DIM];
    for d in 0..ACTION_DIM {
        mean[d] = out[d];
        log_std[d] = out[ACTION_DIM + d].clamp(LOG_STD_MIN, LOG_STD_MAX);
    }
    (mean, log_std)
}

/// Pre-squash Gaussian sample for standard-normal noise `eps`.
pub fn gaussian_sample(mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM], eps: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
    std::array::from_fn(|d| mean[d] + log_std[d].exp() * eps[d])
}

pub fn squash(u: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
    std::array::from_fn(|d| u[d].tanh())
}

/// Log density of the pre-squash sample `u`.
pub fn log_prob(u: &[f64; ACTION_DIM], mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM]) -> f64 {
    (0..ACTION_DIM)
        .map(|d| {
            let z = (u[d] - mean[d]) / log_std[d].exp();
            -0.5 * z * z - log_std[d] - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn entropy(log_std: &[f64; ACTION_DIM]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (1.0 + (2.0 * PI).ln())).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    /// Pre-squash sample.
    pub u: [f64; ACTION_DIM],
    pub normalized: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub action: Action<f64>,
}

/// Samples an action for a feature vector. Non-finite network output is a
/// training divergence.
pub fn policy_act(net: &Mlp<f64>, scale: &ActionScale, features: &[f64], rng: &mut impl Rng) -> Result<SampledAction> {
    let out = net.forward(features);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::TrainingDiverged("policy produced a non-finite output".into()));
    }
    let (mean, log_std) = gaussian_head(&out);
    let eps: [f64; ACTION_DIM] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let u = gaussian_sample(&mean, &log_std, &eps);
    let normalized = squash(&u);
    Ok(SampledAction { u, normalized, log_prob: log_prob(&u, &mean, &log_std), action: scale.to_env(normalized) })
}

/// Squashed mean action.
pub fn policy_mean(net: &Mlp<f64>, scale: &ActionScale, features: &[f64]) -> Result<Action<f64>> {
    let out = net.forward(features);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::TrainingDiverged("policy produced a non-finite output".into()));
    }
    let (mean, _) = gaussian_head(&out);
    Ok(scale.to_env(squash(&mean)))
}

/// A trained policy acting in an environment, either sampling or greedy.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub net: Mlp<f64>,
    pub scale: ActionScale,
    pub deterministic: bool,
}

impl Policy for LearnedPolicy {
    fn act(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<Action<f64>> {
        let f = obs.features();
        if self.deterministic {
            policy_mean(&self.net, &self.scale, &f)
        } else {
            policy_act(&self.net, &self.scale, &f, rng).map(|s| s.action)
        }
    }
}
