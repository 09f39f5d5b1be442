//! One teleoperation trial: a private environment driven by latched velocity
//! commands at a fixed tick rate, with the trial protocol and per-trial
//! metrics.

use std::sync::Arc;

use cathnav::environment::path::PlannedPath;
use cathnav::environment::{EpisodeResult, Environment, Outcome, Scenario, SimRng};
use cathnav::geometry::Vec3;
use cathnav::kinematics::{Action, TipPose};
use cathnav::metrics::{resample_path, MetricsReport};
use cathnav::Error;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::protocol::{Command, Distances, MeshData, Pose, StateFrame, TrialReport, VertexDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Ready,
    Running,
    Succeeded,
    FailedTimeout,
    /// Non-minor wall contact or leaving the lumen.
    FailedCollision,
    /// The simulation could not be advanced.
    FailedError,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Self::Ready | Self::Running)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceKind {
    /// Greedy rollout of a trained planner.
    Cgail,
    Centerline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Guidance {
    pub kind: GuidanceKind,
    pub path: Vec<Vec3<f64>>,
}

impl Guidance {
    pub fn centerline(scenario: &Scenario) -> Self {
        Self { kind: GuidanceKind::Centerline, path: scenario.spaces.centerline.clone() }
    }

    pub fn planned(plan: &PlannedPath) -> Self {
        Self { kind: GuidanceKind::Cgail, path: plan.positions() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub tick_dt: f64,
    pub time_limit: f64,
    /// Insertion speed cap, mm/s.
    pub max_insertion_speed: f64,
    /// Vertices displaced less than this are left out of frames, mm.
    pub delta_threshold: f64,
    /// Guidance waypoints closer than this count as reached, mm.
    pub waypoint_radius: f64,
    /// Samples in the resampled guidance path used for tracking error.
    pub guidance_samples: usize,
    /// Wall distance search radius, mm.
    pub wall_search: f64,
    /// Seeds the start pose and target draw.
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_dt: 0.05,
            time_limit: 180.0,
            max_insertion_speed: 5.0,
            delta_threshold: 0.05,
            waypoint_radius: 5.0,
            guidance_samples: 500,
            wall_search: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub enum SessionError {
    /// The session is not in a state that accepts the request.
    Rejected { state: SessionState, reason: String },
    Core(Error),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Rejected { state, reason } => write!(f, "{reason} (session is {state:?})"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SessionError {}

impl From<Error> for SessionError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

/// Result of one tick: the frame and, on the terminal tick, the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub frame: StateFrame,
    pub terminal: Option<TrialReport>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    scenario: Arc<Scenario>,
    guidance: Guidance,
    desired: Vec<Vec3<f64>>,
    config: SessionConfig,
    env: Environment,
    state: SessionState,
    command: Command,
    tick: u64,
    limit_ticks: u64,
    /// Furthest guidance index the tip has been nearest to.
    progress: usize,
    trajectory: Vec<Vec3<f64>>,
    poses: Vec<TipPose<f64>>,
    report: Option<TrialReport>,
}

impl Session {
    pub fn new(id: impl Into<String>, scenario: Arc<Scenario>, guidance: Guidance, config: SessionConfig) -> Result<Self, SessionError> {
        if guidance.path.len() < 2 {
            return Err(Error::Config("guidance path needs at least two waypoints".into()).into());
        }
        if !(config.tick_dt > 0.0 && config.time_limit > 0.0 && config.max_insertion_speed >= 0.0) {
            return Err(Error::Config("tick_dt and time_limit must be positive".into()).into());
        }
        let desired = resample_path(&guidance.path, config.guidance_samples)?;
        // the trial clock, not the environment step budget, ends a trial
        let mut unlimited = (*scenario).clone();
        unlimited.file.max_steps = usize::MAX;
        let limit_ticks = (config.time_limit / config.tick_dt).round() as u64;
        let mut s = Self {
            id: id.into(),
            env: Environment::new(Arc::new(unlimited)),
            scenario,
            guidance,
            desired,
            config,
            state: SessionState::Ready,
            command: Command::default(),
            tick: 0,
            limit_ticks,
            progress: 0,
            trajectory: Vec::new(),
            poses: Vec::new(),
            report: None,
        };
        s.restart();
        Ok(s)
    }

    fn restart(&mut self) {
        let mut rng = SimRng::seed_from_u64(self.config.seed);
        self.env.reset(&mut rng);
        self.state = SessionState::Ready;
        self.command = Command::default();
        self.tick = 0;
        self.progress = 0;
        self.trajectory = vec![self.env.pose().position];
        self.poses = vec![*self.env.pose()];
        self.report = None;
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn guidance(&self) -> &Guidance {
        &self.guidance
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn pose(&self) -> &TipPose<f64> {
        self.env.pose()
    }

    pub fn clock(&self) -> f64 {
        self.tick as f64 * self.config.tick_dt
    }

    pub fn mesh(&self) -> MeshData {
        MeshData { vertices: self.scenario.mesh.vertices.clone(), triangles: self.scenario.mesh.triangles.clone() }
    }

    pub fn start(&mut self) -> Result<(), SessionError> {
        if self.state != SessionState::Ready {
            return Err(self.rejected("start requires a ready session"));
        }
        self.state = SessionState::Running;
        Ok(())
    }

    /// Returns to a fresh ready trial with a new id.
    pub fn reset(&mut self, id: impl Into<String>) {
        self.id = id.into();
        self.restart();
    }

    /// Latches a command for the following ticks. The insertion speed is
    /// capped here; bends are clamped per step by the kinematics.
    pub fn command(&mut self, c: Command) -> Result<(), SessionError> {
        if self.state.is_terminal() {
            return Err(self.rejected("session has ended"));
        }
        if ![c.alpha_rate, c.gamma_rate, c.insertion_velocity].iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("command rates must be finite".into()).into());
        }
        let v = self.config.max_insertion_speed;
        self.command = Command { insertion_velocity: c.insertion_velocity.clamp(-v, v), ..c };
        Ok(())
    }

    pub fn latched(&self) -> Command {
        self.command
    }

    fn rejected(&self, reason: &str) -> SessionError {
        SessionError::Rejected { state: self.state, reason: reason.into() }
    }

    /// Advances the trial clock by one tick, taking every environment step
    /// that falls due.
    pub fn tick(&mut self) -> Result<Tick, SessionError> {
        if self.state != SessionState::Running {
            return Err(self.rejected("tick requires a running session"));
        }
        self.tick += 1;
        let env_dt = self.env.spec().dt;
        let due = (self.clock() / env_dt + 1e-9).floor() as usize;
        let mut outcome = None;
        let mut diagnostic = None;
        while outcome.is_none() && self.env.steps() < due {
            let c = self.command;
            let action = Action::new(c.alpha_rate * env_dt, c.gamma_rate * env_dt, c.insertion_velocity * env_dt);
            match self.env.step_signed(&action) {
                Ok(step) => {
                    self.trajectory.push(step.observation.pose.position);
                    self.poses.push(step.observation.pose);
                    outcome = step.outcome;
                }
                Err(e) => {
                    diagnostic = Some(e.to_string());
                    break;
                }
            }
        }
        self.update_progress();
        self.state = match (outcome, &diagnostic) {
            (_, Some(_)) => SessionState::FailedError,
            (Some(Outcome::Success), _) => SessionState::Succeeded,
            (Some(Outcome::Collision | Outcome::Exit), _) => SessionState::FailedCollision,
            (Some(Outcome::StepLimit), _) | (None, _) if self.tick >= self.limit_ticks => SessionState::FailedTimeout,
            _ => SessionState::Running,
        };
        let frame = self.frame();
        let terminal = if self.state.is_terminal() { Some(self.finish(diagnostic)?) } else { None };
        Ok(Tick { frame, terminal })
    }

    fn update_progress(&mut self) {
        let tip = self.env.pose().position;
        let nearest = (0..self.guidance.path.len())
            .min_by(|&a, &b| self.guidance.path[a].distance(tip).total_cmp(&self.guidance.path[b].distance(tip)))
            .unwrap_or(0);
        self.progress = self.progress.max(nearest);
    }

    /// First guidance waypoint past the furthest one reached that is still
    /// outside the waypoint radius.
    pub fn next_waypoint(&self) -> Option<Vec3<f64>> {
        let tip = self.env.pose().position;
        self.guidance.path[self.progress..].iter().copied().find(|w| w.distance(tip) > self.config.waypoint_radius)
    }

    pub fn frame(&self) -> StateFrame {
        let pose = *self.env.pose();
        let world = self.env.world();
        let next = self.next_waypoint();
        let bend_direction = next.and_then(|w| (pose.rotation().transpose() * (w - pose.position)).try_normalize());
        let target = self.env.target_position();
        StateFrame {
            tick: self.tick,
            clock: self.clock(),
            state: self.state,
            pose: Pose { position: pose.position, alpha: pose.alpha, gamma: pose.gamma },
            body: self.env.body().polyline(),
            deltas: world
                .displacements()
                .filter(|(_, d)| d.norm() > self.config.delta_threshold)
                .map(|(index, offset)| VertexDelta { index, offset })
                .collect(),
            target,
            next_waypoint: next,
            bend_direction,
            distances: Distances {
                to_target: pose.position.distance(target),
                to_wall: world.clearance(pose.position, self.config.wall_search),
            },
        }
    }

    fn finish(&mut self, diagnostic: Option<String>) -> Result<TrialReport, SessionError> {
        let steps = self.trajectory.len() - 1;
        let outcome = match self.state {
            SessionState::Succeeded => Outcome::Success,
            SessionState::FailedCollision => Outcome::Collision,
            _ => Outcome::StepLimit,
        };
        let episode = EpisodeResult {
            transitions: Vec::new(),
            success: self.state == SessionState::Succeeded,
            outcome,
            n0: 1,
            ng: steps,
            t0: 0.0,
            tg: self.clock(),
            trajectory: self.trajectory.clone(),
            poses: self.poses.clone(),
            target: self.env.target_position(),
            target_particle: self.env.world().target_particle,
        };
        let report = TrialReport {
            session_id: self.id.clone(),
            scenario: self.scenario.name().to_string(),
            scenario_hash: self.scenario.hash.clone(),
            guidance: self.guidance.kind,
            deformable: self.scenario.file.deformable,
            epsilon: self.scenario.file.reward.epsilon,
            state: self.state,
            elapsed: self.clock(),
            diagnostic,
            metrics: MetricsReport::from_episodes(&[episode], &self.desired)?,
        };
        self.report = Some(report.clone());
        Ok(report)
    }

    /// Tip positions after every environment step, starting at the start pose.
    pub fn trajectory(&self) -> &[Vec3<f64>] {
        &self.trajectory
    }

    pub fn report(&self) -> Result<&TrialReport, SessionError> {
        self.report.as_ref().ok_or_else(|| self.rejected("report requires a terminal session"))
    }
}
