//! The training loop.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::buffer::RolloutBuffer;
use super::checkpoint::{Checkpoint, Optimizers, RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use super::config::TrainConfig;
use super::curriculum::CurriculumState;
use super::log::IterationLog;
use super::losses::{
    bc_loss, curiosity_loss, disc_input, gail_loss, gail_reward, gail_update, intrinsic_reward, ppo_loss,
    CuriosityGrads, CuriosityNets, CuriositySample, PpoParams, PpoSample, VALUE_HEADS,
};
use super::policy::{policy_act, ActionScale, LearnedPolicy, ACTION_DIM, TARGET_LIMIT};
use crate::demonstrations::Demonstration;
use crate::environment::{run_episode, EpisodeResult, Environment, Observation, Outcome, Policy, Scenario, SimRng};
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Initial log standard deviation of the policy head.
const INITIAL_LOG_STD: f64 = -0.5;

#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    scenario: Arc<Scenario>,
    env: Environment,
    pub policy: Mlp<f64>,
    pub value: Mlp<f64>,
    pub disc: Mlp<f64>,
    pub curiosity: CuriosityNets,
    optimizers: Optimizers,
    pub curriculum: CurriculumState,
    rng: SimRng,
    pub scale: ActionScale,
    pub iteration: usize,
    pub env_steps: usize,
    demo_features: Vec<Vec<f64>>,
    demo_actions: Vec<[f64; ACTION_DIM]>,
    /// Rows logged by this trainer instance.
    pub log: Vec<IterationLog>,
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::TrainingDiverged(format!("{name} is not finite")))
    }
}

impl Trainer {
    pub fn new(scenario: Arc<Scenario>, demos: &[Demonstration], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SimRng::seed_from_u64(config.seed);
        let spec = scenario.file.catheter;
        let curriculum = CurriculumState::new(&config.curriculum, spec.theta_max);
        let scale = ActionScale::for_spec(&spec, curriculum.current_theta_max);
        let obs_dim = Observation::feature_dim(scenario.file.rays.count());
        let hidden = config.hidden();
        let sizes = |i: usize, o: usize| [vec![i], hidden.clone(), vec![o]].concat();
        let mut policy = Mlp::random(&sizes(obs_dim, 2 * ACTION_DIM), 0.01, &mut rng)?;
        let n = policy.params.len();
        policy.params[n - ACTION_DIM..].iter_mut().for_each(|b| *b = INITIAL_LOG_STD);
        let value = Mlp::random(&sizes(obs_dim, VALUE_HEADS), 1.0, &mut rng)?;
        let disc = Mlp::random(&sizes(obs_dim + ACTION_DIM, 1), 1.0, &mut rng)?;
        let curiosity = CuriosityNets::new(obs_dim, config.curiosity_features, config.hidden_units, &mut rng)?;
        let optimizers = Optimizers::new(&policy, &value, &disc, &curiosity, config.learning_rate);
        let mut t = Self {
            env: Environment::new(scenario.clone()),
            scenario,
            policy,
            value,
            disc,
            curiosity,
            optimizers,
            curriculum,
            rng,
            scale,
            iteration: 0,
            env_steps: 0,
            demo_features: Vec::new(),
            demo_actions: Vec::new(),
            log: Vec::new(),
            config,
        };
        t.set_demos(demos)?;
        Ok(t)
    }

    /// Continues a run from a checkpoint of the same scenario.
    pub fn resume(scenario: Arc<Scenario>, demos: &[Demonstration], ck: &Checkpoint) -> Result<Self> {
        if ck.scenario_hash != scenario.hash || ck.schema_hash != scenario.schema_hash() {
            return Err(Error::Schema(format!("checkpoint was written for scenario {} with different geometry or schema", ck.scenario)));
        }
        let mut t = Self::new(scenario, demos, ck.config.clone())?;
        t.restore(ck)?;
        t.curriculum = ck.curriculum.clone();
        t.optimizers = ck.optimizers.clone();
        t.rng = ck.rng.restore()?;
        t.iteration = ck.iteration;
        t.env_steps = ck.env_steps;
        Ok(t)
    }

    /// Loads network weights from an earlier run (e.g. rigid pre-training
    /// before deformable re-training). Optimizer and curriculum state start
    /// fresh.
    pub fn load_weights(&mut self, ck: &Checkpoint) -> Result<()> {
        if ck.schema_hash != self.scenario.schema_hash() {
            return Err(Error::Schema("checkpoint observation schema differs from the scenario".into()));
        }
        self.restore(ck)
    }

    fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        let same = ck.policy.sizes() == self.policy.sizes()
            && ck.value.sizes() == self.value.sizes()
            && ck.disc.sizes() == self.disc.sizes()
            && ck.curiosity.encoder.sizes() == self.curiosity.encoder.sizes();
        if !same {
            return Err(Error::Schema("checkpoint network shapes differ from the configuration".into()));
        }
        self.policy = ck.policy.clone();
        self.value = ck.value.clone();
        self.disc = ck.disc.clone();
        self.curiosity = ck.curiosity.clone();
        self.scale = ck.scale;
        Ok(())
    }

    fn set_demos(&mut self, demos: &[Demonstration]) -> Result<()> {
        let schema = self.scenario.schema_hash();
        let dim = self.policy.input_dim();
        self.demo_features.clear();
        self.demo_actions.clear();
        for d in demos.iter().filter(|d| d.outcome || !self.config.successful_demos_only) {
            if d.meta.schema_hash != schema {
                return Err(Error::Schema(format!("demonstration schema {} does not match scenario schema {schema}", d.meta.schema_hash)));
            }
            for s in &d.steps {
                let f = s.observation.features();
                if f.len() != dim {
                    return Err(Error::Schema(format!("demonstration observation has {} features, expected {dim}", f.len())));
                }
                self.demo_features.push(f);
                self.demo_actions.push(self.scale.to_normalized(&s.action).map(|a| a.clamp(-TARGET_LIMIT, TARGET_LIMIT)));
            }
        }
        if self.demo_features.is_empty() {
            return Err(Error::config("training needs at least one usable demonstration step"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn demo_len(&self) -> usize {
        self.demo_features.len()
    }

    pub fn is_finished(&self) -> bool {
        self.env_steps >= self.config.max_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            config_hash: self.config.hash(),
            scenario: self.scenario.name().into(),
            scenario_hash: self.scenario.hash.clone(),
            schema_hash: self.scenario.schema_hash(),
            iteration: self.iteration,
            env_steps: self.env_steps,
            scale: self.scale,
            policy: self.policy.clone(),
            value: self.value.clone(),
            disc: self.disc.clone(),
            curiosity: self.curiosity.clone(),
            optimizers: self.optimizers.clone(),
            curriculum: self.curriculum.clone(),
            rng: RngState::capture(&self.rng),
        }
    }

    pub fn learned_policy(&self, deterministic: bool) -> LearnedPolicy {
        LearnedPolicy { net: self.policy.clone(), scale: self.scale, deterministic }
    }

    /// Runs iterations until `max_steps` environment steps have been taken.
    pub fn train(&mut self, mut on_iteration: impl FnMut(&Self, &IterationLog) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let row = self.iterate()?;
            on_iteration(self, &row)?;
        }
        Ok(())
    }

    /// One collect-and-update iteration. On divergence the trainer is left in
    /// its state before the iteration.
    pub fn iterate(&mut self) -> Result<IterationLog> {
        let backup = self.clone();
        match self.iterate_inner() {
            Ok(row) => {
                self.log.push(row);
                Ok(row)
            }
            Err(e) => {
                *self = backup;
                Err(e)
            }
        }
    }

    fn collect(&mut self, n: usize) -> Result<(RolloutBuffer, Vec<(f64, bool)>, f64)> {
        let mut buf = RolloutBuffer::default();
        let mut episodes = Vec::new();
        self.env.set_theta_max(self.curriculum.current_theta_max);
        let mut f = self.env.reset(&mut self.rng).features();
        let mut ep_reward = 0.0;
        for t in 0..n {
            let s = policy_act(&self.policy, &self.scale, &f, &mut self.rng)?;
            let step = self.env.step(&s.action)?;
            let nf = step.observation.features();
            let r = step.reward.total();
            ep_reward += r;
            let normalized = self.scale.to_normalized(&step.action);
            let terminal = step.done && !step.truncated;
            buf.push(std::mem::take(&mut f), nf.clone(), s.u, normalized, s.log_prob, r, terminal, step.done || t + 1 == n);
            if step.done {
                episodes.push((ep_reward, step.outcome == Some(Outcome::Success)));
                self.curriculum = self.curriculum.update(ep_reward);
                self.env.set_theta_max(self.curriculum.current_theta_max);
                ep_reward = 0.0;
                f = self.env.reset(&mut self.rng).features();
            } else {
                f = nf;
            }
        }
        Ok((buf, episodes, ep_reward))
    }

    fn iterate_inner(&mut self) -> Result<IterationLog> {
        let cfg = self.config.clone();
        let n = cfg.buffer_size.min(cfg.max_steps.saturating_sub(self.env_steps)).max(1);
        let (mut buf, episodes, partial) = self.collect(n)?;

        if cfg.lambda > 0.0 {
            buf.rewards[1] = (0..n).map(|t| gail_reward(&self.disc, &disc_input(&buf.features[t], &buf.normalized[t]))).collect();
        }
        if cfg.nu > 0.0 {
            buf.rewards[2] = (0..n)
                .map(|t| intrinsic_reward(&self.curiosity, &buf.features[t], &buf.next_features[t], &buf.normalized[t], cfg.curiosity_scale))
                .collect();
        }
        let heads = |net: &Mlp<f64>, x: &[f64]| -> [f64; VALUE_HEADS] {
            let v = net.forward(x);
            std::array::from_fn(|h| v[h])
        };
        let values: Vec<_> = buf.features.iter().map(|x| heads(&self.value, x)).collect();
        let next_values: Vec<_> = buf.next_features.iter().map(|x| heads(&self.value, x)).collect();
        buf.finish(&values, &next_values, [cfg.ppo_gamma, cfg.gail_gamma, cfg.ppo_gamma], cfg.gae_lambda);

        let params = PpoParams { clip_ratio: cfg.clip_ratio, beta: cfg.ppo_beta, value_coef: cfg.value_coef };
        let w_ppo = cfg.kappa * (1.0 - cfg.mu);
        let w_bc = cfg.kappa * cfg.mu;
        let mut sums = [0.0; 4];
        let mut batches = 0usize;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut gp = vec![0.0; self.policy.num_params()];
        let mut gv = vec![0.0; self.value.num_params()];
        let mut gd = vec![0.0; self.disc.num_params()];
        let mut ge = vec![0.0; self.curiosity.encoder.num_params()];
        let mut gf = vec![0.0; self.curiosity.forward.num_params()];
        let mut gi = vec![0.0; self.curiosity.inverse.num_params()];
        for _ in 0..cfg.epochs {
            idx.shuffle(&mut self.rng);
            for chunk in idx.chunks(cfg.batch_size) {
                let samples: Vec<PpoSample<'_>> = chunk
                    .iter()
                    .map(|&i| PpoSample {
                        features: &buf.features[i],
                        u: buf.u[i],
                        old_log_prob: buf.log_prob[i],
                        advantage: buf.advantages[i],
                        returns: buf.returns[i],
                    })
                    .collect();
                let demo_idx: Vec<usize> = chunk.iter().map(|_| self.rng.random_range(0..self.demo_features.len())).collect();
                let bc_batch: Vec<(&[f64], [f64; ACTION_DIM])> =
                    demo_idx.iter().map(|&j| (self.demo_features[j].as_slice(), self.demo_actions[j])).collect();

                gp.fill(0.0);
                gv.fill(0.0);
                let ppo = ppo_loss(&self.policy, &self.value, &samples, &params, w_ppo, Some((&mut gp, &mut gv)));
                let l_bc = bc_loss(&self.policy, &bc_batch, w_bc, Some(&mut gp));

                let policy_in: Vec<Vec<f64>> = chunk.iter().map(|&i| disc_input(&buf.features[i], &buf.normalized[i])).collect();
                let demo_in: Vec<Vec<f64>> = demo_idx.iter().map(|&j| disc_input(&self.demo_features[j], &self.demo_actions[j])).collect();
                let pr: Vec<&[f64]> = policy_in.iter().map(Vec::as_slice).collect();
                let dr: Vec<&[f64]> = demo_in.iter().map(Vec::as_slice).collect();
                let l_gail = if cfg.lambda > 0.0 {
                    gail_update(&mut self.disc, &mut self.optimizers.disc, &dr, &pr, cfg.lambda)
                } else {
                    gd.fill(0.0);
                    gail_loss(&self.disc, &dr, &pr, 0.0, None)
                };

                let cur_batch: Vec<CuriositySample<'_>> = chunk
                    .iter()
                    .map(|&i| CuriositySample { obs: &buf.features[i], next: &buf.next_features[i], action: buf.normalized[i] })
                    .collect();
                let cur = if cfg.nu > 0.0 {
                    ge.fill(0.0);
                    gf.fill(0.0);
                    gi.fill(0.0);
                    let g = CuriosityGrads { encoder: &mut ge, forward: &mut gf, inverse: &mut gi };
                    let terms = curiosity_loss(&self.curiosity, &cur_batch, cfg.curiosity_inverse_weight, cfg.nu, Some(g));
                    self.optimizers.encoder.step(&mut self.curiosity.encoder.params, &ge);
                    self.optimizers.forward.step(&mut self.curiosity.forward.params, &gf);
                    self.optimizers.inverse.step(&mut self.curiosity.inverse.params, &gi);
                    terms
                } else {
                    curiosity_loss(&self.curiosity, &cur_batch, cfg.curiosity_inverse_weight, 0.0, None)
                };

                if w_ppo > 0.0 || w_bc > 0.0 {
                    self.optimizers.policy.step(&mut self.policy.params, &gp);
                }
                if w_ppo > 0.0 {
                    self.optimizers.value.step(&mut self.value.params, &gv);
                }
                sums[0] += finite("L_PPO", ppo.loss)?;
                sums[1] += finite("L_GAIL", l_gail)?;
                sums[2] += finite("L_BC", l_bc)?;
                sums[3] += finite("L_curiosity", cur.loss)?;
                batches += 1;
            }
        }
        let nets_finite = self.policy.is_finite()
            && self.value.is_finite()
            && self.disc.is_finite()
            && self.curiosity.encoder.is_finite()
            && self.curiosity.forward.is_finite()
            && self.curiosity.inverse.is_finite();
        if !nets_finite {
            return Err(Error::TrainingDiverged("network parameters became non-finite".into()));
        }

        self.iteration += 1;
        self.env_steps += n;
        let b = batches.max(1) as f64;
        let (mean_reward, success_rate) = if episodes.is_empty() {
            (partial, 0.0)
        } else {
            let k = episodes.len() as f64;
            (episodes.iter().map(|e| e.0).sum::<f64>() / k, episodes.iter().filter(|e| e.1).count() as f64 / k)
        };
        Ok(IterationLog {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_reward,
            success_rate,
            l_ppo: sums[0] / b,
            l_gail: sums[1] / b,
            l_bc: sums[2] / b,
            l_curiosity: sums[3] / b,
            theta_max_current: self.curriculum.current_theta_max,
        })
    }
}

/// Runs `episodes` episodes of `policy` at the scenario's physical bend
/// limit, seeding episode sampling with `seed`.
pub fn evaluate(scenario: Arc<Scenario>, policy: &mut dyn Policy, episodes: usize, seed: u64) -> Result<Vec<EpisodeResult>> {
    let mut env = Environment::new(scenario);
    let mut rng = SimRng::seed_from_u64(seed);
    (0..episodes).map(|_| run_episode(&mut env, policy, &mut rng)).collect()
}
