//! Lessons over the bend limit: start permissive, tighten toward the
//! physical limit each time the recent episode rewards clear a threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub enabled: bool,
    /// First-lesson bend limit as a multiple of the physical limit.
    pub initial_factor: f64,
    pub decay: f64,
    /// Episodes in the performance window.
    pub window: usize,
    /// Mean-reward threshold per lesson; the last entry repeats.
    pub thresholds: Vec<f64>,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self { enabled: true, initial_factor: 2.0, decay: 0.8, window: 50, thresholds: vec![0.5] }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_factor >= 1.0) || !(self.decay > 0.0 && self.decay < 1.0) || self.window == 0 || self.thresholds.is_empty() {
            return Err(Error::config(format!("invalid curriculum {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub lesson: usize,
    pub current_theta_max: f64,
    pub final_theta_max: f64,
    pub window: VecDeque<f64>,
    pub window_size: usize,
    pub thresholds: Vec<f64>,
    pub decay: f64,
}

impl CurriculumState {
    /// Initial state for a catheter whose physical limit is `final_theta_max`.
    /// Relaxed limits are capped at pi.
    pub fn new(cfg: &CurriculumConfig, final_theta_max: f64) -> Self {
        let start = if cfg.enabled { (cfg.initial_factor * final_theta_max).min(std::f64::consts::PI) } else { final_theta_max };
        Self {
            lesson: 0,
            current_theta_max: start.max(final_theta_max),
            final_theta_max,
            window: VecDeque::with_capacity(cfg.window),
            window_size: cfg.window,
            thresholds: cfg.thresholds.clone(),
            decay: cfg.decay,
        }
    }

    pub fn threshold(&self) -> f64 {
        let i = self.lesson.min(self.thresholds.len() - 1);
        self.thresholds[i]
    }

    pub fn is_final(&self) -> bool {
        self.current_theta_max <= self.final_theta_max
    }

    /// Records an episode reward. When the window is full and its mean meets
    /// the lesson threshold, moves to the next lesson and clears the window.
    pub fn update(&self, episode_reward: f64) -> Self {
        let mut next = self.clone();
        if next.window.len() == next.window_size {
            next.window.pop_front();
        }
        next.window.push_back(episode_reward);
        if next.is_final() || next.window.len() < next.window_size {
            return next;
        }
        let mean = next.window.iter().sum::<f64>() / next.window.len() as f64;
        if mean >= next.threshold() {
            next.lesson += 1;
            next.current_theta_max = (next.decay * next.current_theta_max).max(next.final_theta_max);
            next.window.clear();
        }
        next
    }
}
