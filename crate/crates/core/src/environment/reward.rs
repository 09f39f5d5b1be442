//! Per-step reward: a terminal part (collision, exit or target) plus the
//! small shaping part paid every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_obst: f64,
    pub r_exit: f64,
    pub r_target: f64,
    pub r_step: f64,
    pub r_centerline: f64,
    pub r_bending: f64,
    /// Success radius, mm.
    pub epsilon: f64,
    /// Fraction of the per-step bend bound above which the bending bonus is paid.
    pub bend_fraction: f64,
    /// mm
    pub waypoint_radius: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_obst: -1.0,
            r_exit: -1.0,
            r_target: 1.0,
            r_step: -1e-5,
            r_centerline: 0.05,
            r_bending: 1e-5,
            epsilon: 10.0,
            bend_fraction: 0.8,
            waypoint_radius: 5.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (-1.0..=1.0).contains(&x);
        let signs_ok = self.r_obst <= 0.0
            && self.r_exit <= 0.0
            && self.r_step <= 0.0
            && self.r_target >= 0.0
            && self.r_centerline >= 0.0
            && self.r_bending >= 0.0;
        let all = [self.r_obst, self.r_exit, self.r_target, self.r_step, self.r_centerline, self.r_bending];
        if !signs_ok || !all.iter().all(|&x| in_unit(x)) {
            return Err(Error::config(format!("reward values out of range: {self:?}")));
        }
        if !(self.epsilon > 0.0) || !(self.waypoint_radius > 0.0) || !(0.0..=1.0).contains(&self.bend_fraction) {
            return Err(Error::config("epsilon and waypoint_radius must be positive, bend_fraction in [0, 1]"));
        }
        Ok(())
    }

    /// Smallest and largest reward a single step can produce.
    pub fn step_bounds(&self) -> (f64, f64) {
        let end_min = self.r_obst.min(self.r_exit).min(0.0);
        let end_max = self.r_target.max(0.0);
        (end_min + self.r_step, end_max + self.r_step + self.r_centerline + self.r_bending)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepEvent {
    pub collided_non_minor: bool,
    pub exited_lumen: bool,
    pub reached_target: bool,
    pub waypoint_hit: bool,
    pub bend_exceeds_threshold: bool,
}

impl StepEvent {
    pub fn is_terminal(&self) -> bool {
        self.collided_non_minor || self.exited_lumen || self.reached_target
    }
}

/// Reward split into its terminal and per-step parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub end: f64,
    pub inner: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        self.end + self.inner
    }
}

pub fn reward_parts(cfg: &RewardConfig, ev: &StepEvent) -> Result<RewardParts> {
    if ev.reached_target && ev.exited_lumen {
        return Err(Error::Contract("a step cannot both reach the target and exit the lumen".into()));
    }
    let end = if ev.collided_non_minor {
        cfg.r_obst
    } else if ev.exited_lumen {
        cfg.r_exit
    } else if ev.reached_target {
        cfg.r_target
    } else {
        0.0
    };
    let mut inner = cfg.r_step;
    if ev.waypoint_hit {
        inner += cfg.r_centerline;
    }
    if ev.bend_exceeds_threshold {
        inner += cfg.r_bending;
    }
    Ok(RewardParts { end, inner })
}

pub fn step_reward(cfg: &RewardConfig, ev: &StepEvent) -> Result<f64> {
    reward_parts(cfg, ev).map(|p| p.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_compositions() {
        let cfg = RewardConfig::default();
        assert_eq!(step_reward(&cfg, &StepEvent::default()).unwrap(), -1e-5);
        let hit = StepEvent { collided_non_minor: true, ..Default::default() };
        assert_eq!(step_reward(&cfg, &hit).unwrap(), -1.0 + -1e-5);
        let reach = StepEvent { reached_target: true, waypoint_hit: true, ..Default::default() };
        assert_eq!(step_reward(&cfg, &reach).unwrap(), 1.0 + -1e-5 + 0.05);
    }

    #[test]
    fn inconsistent_flags_rejected() {
        let ev = StepEvent { reached_target: true, exited_lumen: true, ..Default::default() };
        assert!(matches!(step_reward(&RewardConfig::default(), &ev), Err(Error::Contract(_))));
    }

    #[test]
    fn bounds_cover_every_event_combination() {
        let cfg = RewardConfig::default();
        let (lo, hi) = cfg.step_bounds();
        assert_eq!(lo, -1.0 - 1e-5);
        for bits in 0u8..32 {
            let ev = StepEvent {
                collided_non_minor: bits & 1 != 0,
                exited_lumen: bits & 2 != 0,
                reached_target: bits & 4 != 0,
                waypoint_hit: bits & 8 != 0,
                bend_exceeds_threshold: bits & 16 != 0,
            };
            if let Ok(r) = step_reward(&cfg, &ev) {
                assert!(r >= lo && r <= hi, "{ev:?} -> {r}");
            }
        }
    }
}
