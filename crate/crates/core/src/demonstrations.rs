//! Expert demonstrations: recording, JSON-lines storage, and a scripted
//! pure-pursuit expert.
//!
//! File layout: a header line (format, version, meta, observation schema),
//! one line per step `{"observation": .., "action": ..}`, and a trailer line
//! `{"outcome": bool, "steps": n}` written when the recording closes.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::{run_episode, Environment, EpisodeResult, Observation, Outcome, Policy, SimRng};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec3};
use crate::kinematics::{clamp_action, max_bend_at_step, Action, CatheterSpec};

pub const DEMO_FORMAT: &str = "cathnav-demo";
pub const DEMO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    /// Scenario (anatomy) name.
    pub anatomy: String,
    /// Scenario hash.
    pub spec_hash: String,
    /// Observation schema hash.
    pub schema_hash: String,
    pub recorder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    /// Start pose and target of the recorded episode, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeSeed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSeed {
    pub start: usize,
    pub target_particle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub observation: Observation,
    pub action: Action<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub meta: DemoMeta,
    pub steps: Vec<DemoStep>,
    pub outcome: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    meta: DemoMeta,
    rays: usize,
    obs_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Trailer {
    outcome: bool,
    steps: usize,
}

/// Streams a demonstration to disk one step at a time.
pub struct DemoWriter<W: Write> {
    out: W,
    rays: usize,
    steps: usize,
}

impl DemoWriter<BufWriter<std::fs::File>> {
    pub fn create(path: impl AsRef<Path>, meta: &DemoMeta, rays: usize) -> Result<Self> {
        Self::new(BufWriter::new(std::fs::File::create(path)?), meta, rays)
    }
}

impl<W: Write> DemoWriter<W> {
    pub fn new(mut out: W, meta: &DemoMeta, rays: usize) -> Result<Self> {
        let header = Header {
            format: DEMO_FORMAT.into(),
            version: DEMO_VERSION,
            meta: meta.clone(),
            rays,
            obs_dim: Observation::feature_dim(rays),
        };
        write_line(&mut out, &header)?;
        Ok(Self { out, rays, steps: 0 })
    }

    pub fn push(&mut self, step: &DemoStep) -> Result<()> {
        if step.observation.rays.len() != self.rays {
            return Err(Error::Schema(format!(
                "observation has {} rays, recording expects {}",
                step.observation.rays.len(),
                self.rays
            )));
        }
        write_line(&mut self.out, step)?;
        self.steps += 1;
        Ok(())
    }

    /// Writes the trailer and returns the underlying writer.
    pub fn finish(mut self, outcome: bool) -> Result<W> {
        write_line(&mut self.out, &Trailer { outcome, steps: self.steps })?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::Schema(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

impl Demonstration {
    /// Builds a demonstration from an episode: one step per transition.
    pub fn from_episode(meta: DemoMeta, episode: &EpisodeResult) -> Self {
        let steps = episode
            .transitions
            .iter()
            .map(|t| DemoStep { observation: t.observation.clone(), action: t.action })
            .collect();
        Self { meta, steps, outcome: episode.success }
    }

    pub fn rays(&self) -> usize {
        self.steps.first().map_or(0, |s| s.observation.rays.len())
    }

    pub fn write(&self, out: impl Write, rays: usize) -> Result<()> {
        let mut w = DemoWriter::new(out, &self.meta, rays)?;
        for s in &self.steps {
            w.push(s)?;
        }
        w.finish(self.outcome)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, rays: usize) -> Result<()> {
        self.write(BufWriter::new(std::fs::File::create(path)?), rays)
    }

    /// Parses a demonstration. Errors carry the byte offset of the offending
    /// line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut offset = 0usize;
        let mut lines = text.split_inclusive('\n').map(|l| {
            let at = offset;
            offset += l.len();
            (at, l.trim_end_matches(['\n', '\r']))
        });
        let (_, first) = lines.next().ok_or(Error::Parse { offset: 0, message: "empty file".into() })?;
        let header: Header = serde_json::from_str(first).map_err(|e| Error::Parse { offset: 0, message: format!("header: {e}") })?;
        if header.format != DEMO_FORMAT || header.version != DEMO_VERSION {
            return Err(Error::Schema(format!(
                "unsupported demonstration format {} v{} (expected {DEMO_FORMAT} v{DEMO_VERSION})",
                header.format, header.version
            )));
        }
        if header.obs_dim != Observation::feature_dim(header.rays) {
            return Err(Error::Schema(format!("observation dimension {} does not match {} rays", header.obs_dim, header.rays)));
        }
        let mut steps = Vec::new();
        for (at, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(trailer) = serde_json::from_str::<Trailer>(line) {
                if trailer.steps != steps.len() {
                    return Err(Error::Parse {
                        offset: at,
                        message: format!("trailer counts {} steps, file has {}", trailer.steps, steps.len()),
                    });
                }
                return Ok(Self { meta: header.meta, steps, outcome: trailer.outcome });
            }
            let step: DemoStep = serde_json::from_str(line).map_err(|e| Error::Parse { offset: at, message: e.to_string() })?;
            if step.observation.rays.len() != header.rays {
                return Err(Error::Schema(format!(
                    "step at byte {at} has {} rays, header declares {}",
                    step.observation.rays.len(),
                    header.rays
                )));
            }
            steps.push(step);
        }
        Err(Error::Parse { offset: text.len(), message: "missing trailer (truncated recording)".into() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Loads and checks the observation schema against `schema_hash`.
    pub fn load_checked(path: impl AsRef<Path>, schema_hash: &str) -> Result<Self> {
        let path = path.as_ref();
        let demo = Self::load(path)?;
        if demo.meta.schema_hash != schema_hash {
            return Err(Error::Schema(format!(
                "{} was recorded with observation schema {}, scenario uses {}",
                path.display(),
                demo.meta.schema_hash,
                schema_hash
            )));
        }
        Ok(demo)
    }

    /// Whether every action respects the per-step bend bound of `spec`.
    pub fn is_feasible(&self, spec: &CatheterSpec<f64>) -> bool {
        self.steps.iter().all(|s| {
            let bound = max_bend_at_step(spec, s.action.insertion.abs()).unwrap_or(0.0);
            s.action.alpha.abs() <= bound + 1e-12 && s.action.gamma.abs() <= bound + 1e-12
        })
    }
}

/// `*.jsonl` files in `dir`, sorted by name.
pub fn demo_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Pure-pursuit controller: aims at the centerline point `lookahead` mm past
/// the tip's projection, or at the target once within `target_switch` mm.
#[derive(Debug, Clone)]
pub struct ScriptedExpert {
    centerline: Vec<Vec3<f64>>,
    arc: Vec<f64>,
    spec: CatheterSpec<f64>,
    pub lookahead: f64,
    pub target_switch: f64,
    /// Gaussian noise scale relative to the action bounds.
    pub noise: f64,
}

impl ScriptedExpert {
    pub fn new(centerline: Vec<Vec3<f64>>, spec: CatheterSpec<f64>, noise: f64) -> Self {
        let mut arc = Vec::with_capacity(centerline.len());
        let mut s = 0.0;
        for (i, p) in centerline.iter().enumerate() {
            if i > 0 {
                s += p.distance(centerline[i - 1]);
            }
            arc.push(s);
        }
        Self { centerline, arc, spec, lookahead: 8.0, target_switch: 15.0, noise }
    }

    /// Arc length of the closest point on the centerline polyline.
    fn project(&self, p: Vec3<f64>) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.centerline.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len2 = d.norm_squared();
            let t = if len2 > 0.0 { ((p - w[0]).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let dist = (w[0] + d * t).distance_squared(p);
            if dist < best.0 {
                best = (dist, self.arc[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    fn point_at(&self, s: f64) -> Vec3<f64> {
        let last = self.centerline.len() - 1;
        if s >= self.arc[last] {
            return self.centerline[last];
        }
        let i = self.arc.partition_point(|&a| a <= s).max(1) - 1;
        let seg = self.arc[i + 1] - self.arc[i];
        let t = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        self.centerline[i].lerp(self.centerline[i + 1], t)
    }

    /// Noise-free action for an observation.
    pub fn clean_action(&self, obs: &Observation) -> Action<f64> {
        let p = obs.pose.position;
        let aim = if obs.v.norm() < self.target_switch {
            p + obs.v
        } else {
            self.point_at(self.project(p) + self.lookahead)
        };
        let w = (aim - p).try_normalize().unwrap_or_else(|| obs.pose.heading());
        let alpha = w.z.clamp(-1.0, 1.0).asin();
        let gamma = (-w.x).atan2(w.y);
        let raw = Action::new(alpha - obs.pose.alpha, wrap_angle(gamma - obs.pose.gamma), self.spec.max_step());
        clamp_action(&self.spec, &raw)
    }
}

impl Policy for ScriptedExpert {
    fn act(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<Action<f64>> {
        let mut a = self.clean_action(obs);
        if self.noise > 0.0 {
            let bound = max_bend_at_step(&self.spec, self.spec.max_step())?;
            let n: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            a.alpha += self.noise * bound * n[0];
            a.gamma += self.noise * bound * n[1];
            a.insertion *= 1.0 - (self.noise * n[2]).abs().min(1.0);
        }
        Ok(clamp_action(&self.spec, &a))
    }
}

/// Runs one episode of `policy` and keeps it as a demonstration.
pub fn record(env: &mut Environment, policy: &mut dyn Policy, rng: &mut SimRng, meta: DemoMeta) -> Result<Demonstration> {
    let episode = run_episode(env, policy, rng)?;
    let seed = EpisodeSeed { start: env.start_index(), target_particle: episode.target_particle };
    Ok(Demonstration::from_episode(DemoMeta { episode: Some(seed), ..meta }, &episode))
}

/// Result of re-executing a recording's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub steps: usize,
    /// `None` when the actions ran out before the episode ended.
    pub outcome: Option<Outcome>,
    pub trajectory: Vec<Vec3<f64>>,
    pub target: Vec3<f64>,
    /// Largest feature difference between replayed and recorded observations.
    pub max_observation_error: f64,
}

/// Re-executes `demo` from its episode seed in `env`, whose scenario must be
/// the one it was recorded in.
pub fn replay(env: &mut Environment, demo: &Demonstration) -> Result<Replay> {
    let sc = env.scenario().clone();
    if demo.meta.spec_hash != sc.hash {
        return Err(Error::Schema(format!("recording belongs to scenario {}, not {}", demo.meta.anatomy, sc.name())));
    }
    let seed = demo.meta.episode.ok_or_else(|| Error::Config("recording has no episode seed to replay from".into()))?;
    if seed.target_particle >= env.world().particles.len() {
        return Err(Error::Schema(format!("target particle {} is outside the mesh", seed.target_particle)));
    }
    let mut obs = env.reset_with(seed.start, seed.target_particle);
    let mut trajectory = vec![env.pose().position];
    let mut max_err = 0.0f64;
    let mut outcome = None;
    let mut steps = 0;
    for s in &demo.steps {
        let recorded = s.observation.features();
        let err = obs.features().iter().zip(&recorded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_err = max_err.max(err);
        let step = env.step_signed(&s.action)?;
        steps += 1;
        trajectory.push(step.observation.pose.position);
        obs = step.observation;
        if step.done {
            outcome = step.outcome;
            break;
        }
    }
    Ok(Replay { steps, outcome, trajectory, target: env.target_position(), max_observation_error: max_err })
}

/// Meta block for recordings of `env`'s scenario.
pub fn meta_for(env: &Environment, recorder: &str, date: Option<String>) -> DemoMeta {
    let sc = env.scenario();
    DemoMeta {
        anatomy: sc.name().to_string(),
        spec_hash: sc.hash.clone(),
        schema_hash: sc.schema_hash(),
        recorder: recorder.into(),
        date,
        episode: None,
    }
}
