//! On-policy rollout storage and generalized advantage estimation.

use super::losses::VALUE_HEADS;
use super::policy::ACTION_DIM;

/// Generalized advantage estimates and returns for one reward stream.
///
/// `next_values[t]` is the value of the successor state, zero when the
/// transition is terminal. `ends[t]` marks the last transition of an episode
/// segment (terminal, truncated or cut by the buffer end); advantages do not
/// propagate across it.
pub fn gae(rewards: &[f64], values: &[f64], next_values: &[f64], ends: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if ends[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit standard deviation.
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    x.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Transitions collected by the current policy. Demonstration data never
/// enters this buffer.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub features: Vec<Vec<f64>>,
    pub next_features: Vec<Vec<f64>>,
    /// Pre-squash action samples.
    pub u: Vec<[f64; ACTION_DIM]>,
    /// Squashed actions in `[-1, 1]^3`.
    pub normalized: Vec<[f64; ACTION_DIM]>,
    pub log_prob: Vec<f64>,
    /// Reward streams: extrinsic, imitation, curiosity.
    pub rewards: [Vec<f64>; VALUE_HEADS],
    /// True terminal transitions (no bootstrap).
    pub terminal: Vec<bool>,
    /// Last transition of an episode segment.
    pub ends: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<[f64; VALUE_HEADS]>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn push(&mut self, features: Vec<f64>, next_features: Vec<f64>, u: [f64; ACTION_DIM], normalized: [f64; ACTION_DIM], log_prob: f64, reward: f64, terminal: bool, end: bool) {
        self.features.push(features);
        self.next_features.push(next_features);
        self.u.push(u);
        self.normalized.push(normalized);
        self.log_prob.push(log_prob);
        self.rewards[0].push(reward);
        self.terminal.push(terminal);
        self.ends.push(end);
    }

    /// Fills `advantages` (summed over streams, normalized) and per-stream
    /// `returns` from value estimates `values[t]` and `next_values[t]`.
    pub fn finish(&mut self, values: &[[f64; VALUE_HEADS]], next_values: &[[f64; VALUE_HEADS]], gammas: [f64; VALUE_HEADS], lambda: f64) {
        let n = self.len();
        self.advantages = vec![0.0; n];
        self.returns = vec![[0.0; VALUE_HEADS]; n];
        for h in 0..VALUE_HEADS {
            if self.rewards[h].len() != n {
                self.rewards[h] = vec![0.0; n];
            }
            let v: Vec<f64> = values.iter().map(|x| x[h]).collect();
            let nv: Vec<f64> = next_values.iter().zip(&self.terminal).map(|(x, &t)| if t { 0.0 } else { x[h] }).collect();
            let (adv, ret) = gae(&self.rewards[h], &v, &nv, &self.ends, gammas[h], lambda);
            for t in 0..n {
                self.advantages[t] += adv[t];
                self.returns[t][h] = ret[t];
            }
        }
        normalize(&mut self.advantages);
    }
}
