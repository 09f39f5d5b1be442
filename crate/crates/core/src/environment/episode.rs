//! Environment state machine and episode rollouts.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::observation::Observation;
use super::reward::{reward_parts, RewardConfig, RewardParts, StepEvent};
use super::scenario::Scenario;
use super::spaces::Spaces;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{
    apply_action, apply_signed_action, clamp_action, clamp_signed_action, max_bend_at_step, Action, CatheterBody,
    CatheterSpec, TipPose,
};
use crate::softbody::{CollisionReport, SoftBodyWorld};

pub type SimRng = ChaCha8Rng;

/// Anything that maps observations to actions. Returned actions are clamped
/// by the environment.
pub trait Policy {
    fn act(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<Action<f64>>;
}

impl<F: FnMut(&Observation) -> Action<f64>> Policy for F {
    fn act(&mut self, obs: &Observation, _rng: &mut SimRng) -> Result<Action<f64>> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Exit,
    StepLimit,
}

/// Inputs to event detection for one step.
pub struct StepContext<'a> {
    pub prev: &'a TipPose<f64>,
    pub next: &'a TipPose<f64>,
    pub action: &'a Action<f64>,
    /// Spec whose bend bound the action was clamped against.
    pub spec: &'a CatheterSpec<f64>,
    pub contact: &'a CollisionReport<f64>,
    /// The step segment passed through the wall.
    pub crossed_wall: bool,
}

/// Evaluates the step's reward events. Newly entered waypoints are marked in
/// `visited`; at most one waypoint (the nearest) is credited per step.
pub fn detect_events(
    ctx: &StepContext<'_>,
    world: &SoftBodyWorld<f64>,
    spaces: &Spaces,
    cfg: &RewardConfig,
    visited: &mut [bool],
) -> StepEvent {
    let collided = ctx.contact.is_non_minor() || ctx.crossed_wall;
    let exited = !collided && spaces.openings.iter().any(|o| o.crossed_outward(ctx.prev.position, ctx.next.position));
    let reached = !collided && !exited && ctx.next.position.distance(world.target_position()) < cfg.epsilon;
    let p = ctx.next.position;
    let nearest = spaces
        .centerline
        .iter()
        .enumerate()
        .filter(|(i, w)| !visited[*i] && w.distance(p) < cfg.waypoint_radius)
        .min_by(|a, b| a.1.distance(p).total_cmp(&b.1.distance(p)))
        .map(|(i, _)| i);
    if let Some(i) = nearest {
        visited[i] = true;
    }
    let bound = max_bend_at_step(ctx.spec, ctx.action.insertion.abs()).unwrap_or(0.0);
    let bend = ctx.action.alpha.abs().max(ctx.action.gamma.abs());
    StepEvent {
        collided_non_minor: collided,
        exited_lumen: exited,
        reached_target: reached,
        waypoint_hit: nearest.is_some(),
        bend_exceeds_threshold: bend > cfg.bend_fraction * bound,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// The clamped action that was executed.
    pub action: Action<f64>,
    pub observation: Observation,
    pub event: StepEvent,
    pub reward: RewardParts,
    pub contact: CollisionReport<f64>,
    /// Episode over (terminal event or step limit).
    pub done: bool,
    /// Ended only because of the step limit.
    pub truncated: bool,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Arc<Scenario>,
    world: SoftBodyWorld<f64>,
    pose: TipPose<f64>,
    body: CatheterBody<f64>,
    visited: Vec<bool>,
    steps: usize,
    done: bool,
    /// Bend limit currently in force (curriculum), rad.
    theta_max: f64,
    /// Start pose index of the current episode.
    start: usize,
}

const BODY_POINTS: usize = 400;

impl Environment {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        let world = scenario.world.clone();
        let pose = scenario.spaces.start_poses[0];
        let theta_max = scenario.file.catheter.theta_max;
        let visited = vec![false; scenario.spaces.centerline.len()];
        let mut env = Self { scenario, world, pose, body: CatheterBody::new(BODY_POINTS), visited, steps: 0, done: false, theta_max, start: 0 };
        env.body.push(pose);
        env
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn world(&self) -> &SoftBodyWorld<f64> {
        &self.world
    }

    pub fn pose(&self) -> &TipPose<f64> {
        &self.pose
    }

    pub fn body(&self) -> &CatheterBody<f64> {
        &self.body
    }

    pub fn visited(&self) -> &[bool] {
        &self.visited
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Sets the bend limit used to clamp actions (clamped into the valid
    /// range `(0, pi]`).
    pub fn set_theta_max(&mut self, theta: f64) {
        self.theta_max = theta.clamp(f64::EPSILON, std::f64::consts::PI);
    }

    /// Catheter spec with the current bend limit.
    pub fn spec(&self) -> CatheterSpec<f64> {
        self.scenario.file.catheter.with_theta_max(self.theta_max)
    }

    /// Starts an episode from a random start pose with a random target.
    pub fn reset(&mut self, rng: &mut SimRng) -> Observation {
        let start = rng.random_range(0..self.scenario.spaces.start_poses.len());
        self.world.reset();
        let target = self.scenario.spaces.sample_target(&self.world, rng);
        self.reset_with(start, target)
    }

    /// Starts an episode from a given start pose index and target particle.
    pub fn reset_with(&mut self, start: usize, target_particle: usize) -> Observation {
        self.world.reset();
        self.world.target_particle = target_particle;
        self.start = start % self.scenario.spaces.start_poses.len();
        self.pose = self.scenario.spaces.start_poses[self.start];
        self.body = CatheterBody::new(BODY_POINTS);
        self.body.push(self.pose);
        self.visited.iter_mut().for_each(|v| *v = false);
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        Observation::build(&self.world, &self.pose, &self.scenario.file.rays, self.scenario.spaces.d_max)
    }

    pub fn target_position(&self) -> Vec3<f64> {
        self.world.target_position()
    }

    /// Clamps and executes a learner action (insertion only).
    pub fn step(&mut self, raw: &Action<f64>) -> Result<StepOutcome> {
        let spec = self.spec();
        let action = clamp_action(&spec, raw);
        let next = apply_action(&spec, &self.pose, &action)?;
        self.advance(spec, action, next)
    }

    /// Clamps and executes a teleoperation action (insertion may be negative).
    pub fn step_signed(&mut self, raw: &Action<f64>) -> Result<StepOutcome> {
        let spec = self.spec();
        let action = clamp_signed_action(&spec, raw);
        let next = apply_signed_action(&spec, &self.pose, &action)?;
        self.advance(spec, action, next)
    }

    fn advance(&mut self, spec: CatheterSpec<f64>, action: Action<f64>, next: TipPose<f64>) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract("episode is over; reset first".into()));
        }
        let file = &self.scenario.file;
        let radius = spec.radius();
        let crossed_wall = self.world.segment_crosses_surface(self.pose.position, next.position);
        let contact = if file.deformable {
            self.world.step(spec.dt)?;
            self.world.apply_tip_contact(next.position, radius)
        } else {
            self.world.contact_report(next.position, radius)
        };
        let ctx = StepContext { prev: &self.pose, next: &next, action: &action, spec: &spec, contact: &contact, crossed_wall };
        let event = detect_events(&ctx, &self.world, &self.scenario.spaces, &file.reward, &mut self.visited);
        let reward = reward_parts(&file.reward, &event)?;
        self.pose = next;
        self.body.push(next);
        self.steps += 1;
        let outcome = if event.collided_non_minor {
            Some(Outcome::Collision)
        } else if event.exited_lumen {
            Some(Outcome::Exit)
        } else if event.reached_target {
            Some(Outcome::Success)
        } else if self.steps >= file.max_steps {
            Some(Outcome::StepLimit)
        } else {
            None
        };
        self.done = outcome.is_some();
        Ok(StepOutcome {
            action,
            observation: self.observe(),
            event,
            reward,
            contact,
            done: self.done,
            truncated: outcome == Some(Outcome::StepLimit),
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Observation,
    pub action: Action<f64>,
    pub reward: f64,
    pub reward_parts: RewardParts,
    pub next_observation: Observation,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub transitions: Vec<Transition>,
    pub success: bool,
    pub outcome: Outcome,
    /// First and last step index (1-based).
    pub n0: usize,
    pub ng: usize,
    /// First and last timestamp, s.
    pub t0: f64,
    pub tg: f64,
    /// Tip positions, starting with the start pose.
    pub trajectory: Vec<Vec3<f64>>,
    pub poses: Vec<TipPose<f64>>,
    /// Target position at the end of the episode.
    pub target: Vec3<f64>,
    pub target_particle: usize,
}

impl EpisodeResult {
    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn steps(&self) -> usize {
        self.transitions.len()
    }
}

/// Resets `env` and runs `policy` until the episode ends.
pub fn run_episode(env: &mut Environment, policy: &mut dyn Policy, rng: &mut SimRng) -> Result<EpisodeResult> {
    let obs = env.reset(rng);
    run_from(env, obs, policy, rng)
}

/// Runs `policy` from the environment's current (freshly reset) state.
pub fn run_from(env: &mut Environment, mut obs: Observation, policy: &mut dyn Policy, rng: &mut SimRng) -> Result<EpisodeResult> {
    let dt = env.spec().dt;
    let mut transitions = Vec::new();
    let mut trajectory = vec![env.pose().position];
    let mut poses = vec![*env.pose()];
    let outcome = loop {
        let raw = policy.act(&obs, rng)?;
        let step = env.step(&raw)?;
        trajectory.push(step.observation.pose.position);
        poses.push(step.observation.pose);
        transitions.push(Transition {
            observation: obs,
            action: step.action,
            reward: step.reward.total(),
            reward_parts: step.reward,
            next_observation: step.observation.clone(),
            terminal: step.done,
        });
        obs = step.observation;
        if let Some(o) = step.outcome {
            break o;
        }
    };
    let ng = transitions.len();
    Ok(EpisodeResult {
        transitions,
        success: outcome == Outcome::Success,
        outcome,
        n0: 1,
        ng,
        t0: 0.0,
        tg: ng as f64 * dt,
        trajectory,
        poses,
        target: env.target_position(),
        target_particle: env.world().target_particle,
    })
}
