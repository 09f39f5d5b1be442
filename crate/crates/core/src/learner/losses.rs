//! Loss terms with analytic gradients. Every `*_loss` function returns the
//! loss value and, when gradient buffers are given, accumulates
//! `weight * dL/dparams` into them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{entropy, gaussian_head, log_prob, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN};
use crate::error::Result;
use crate::nn::{sigmoid, softplus, Adam, Cache, Mlp};

/// Value heads: extrinsic, imitation (GAIL) and curiosity returns.
pub const VALUE_HEADS: usize = 3;
/// Discriminator probabilities are clipped to `[D_CLIP, 1 - D_CLIP]`.
pub const D_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct PpoSample<'a> {
    pub features: &'a [f64],
    /// Pre-squash action sample.
    pub u: [f64; ACTION_DIM],
    pub old_log_prob: f64,
    pub advantage: f64,
    pub returns: [f64; VALUE_HEADS],
}

#[derive(Debug, Clone, Copy)]
pub struct PpoParams {
    pub clip_ratio: f64,
    /// Entropy coefficient.
    pub beta: f64,
    pub value_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoTerms {
    /// Mean clipped surrogate (already negated for minimization).
    pub surrogate: f64,
    /// `value_coef` times the mean summed squared value error.
    pub value: f64,
    pub entropy: f64,
    /// `surrogate + value - beta * entropy`
    pub loss: f64,
}

/// Clipped surrogate for one sample and its derivative with respect to the
/// new log-probability.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (-unclipped, -unclipped)
    } else {
        (-clipped, 0.0)
    }
}

pub fn ppo_loss(
    policy: &Mlp<f64>,
    value: &Mlp<f64>,
    batch: &[PpoSample<'_>],
    p: &PpoParams,
    weight: f64,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> PpoTerms {
    let n = batch.len().max(1) as f64;
    let mut terms = PpoTerms::default();
    let mut cache = Cache::default();
    let mut vcache = Cache::default();
    let mut grads = grads;
    for s in batch {
        let out = policy.forward_cached(s.features, &mut cache).to_vec();
        let (mean, log_std) = gaussian_head(&out);
        let lp = log_prob(&s.u, &mean, &log_std);
        let ratio = (lp - s.old_log_prob).exp();
        let (surr, dsurr_dlp) = clipped_surrogate(ratio, s.advantage, p.clip_ratio);
        terms.surrogate += surr / n;
        terms.entropy += entropy(&log_std) / n;
        let v = value.forward_cached(s.features, &mut vcache).to_vec();
        let verr: f64 = v.iter().zip(&s.returns).map(|(a, b)| (a - b) * (a - b)).sum();
        terms.value += p.value_coef * verr / n;
        if let Some((gp, gv)) = grads.as_mut() {
            let mut g = [0.0; 2 * ACTION_DIM];
            for d in 0..ACTION_DIM {
                let var = (2.0 * log_std[d]).exp();
                let diff = s.u[d] - mean[d];
                g[d] = dsurr_dlp * diff / var;
                let raw = out[ACTION_DIM + d];
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                    g[ACTION_DIM + d] = dsurr_dlp * (diff * diff / var - 1.0) - p.beta;
                }
            }
            g.iter_mut().for_each(|x| *x *= weight / n);
            policy.backward(&cache, &g, gp, None);
            let gvo: Vec<f64> = v.iter().zip(&s.returns).map(|(a, b)| weight * p.value_coef * 2.0 * (a - b) / n).collect();
            value.backward(&vcache, &gvo, gv, None);
        }
    }
    terms.loss = terms.surrogate + terms.value - p.beta * terms.entropy;
    terms
}

/// Mean squared error between the squashed policy mean and the normalized
/// demonstration action, averaged over samples and action dimensions.
pub fn bc_loss(policy: &Mlp<f64>, batch: &[(&[f64], [f64; ACTION_DIM])], weight: f64, grads: Option<&mut [f64]>) -> f64 {
    let n = batch.len().max(1) as f64;
    let scale = 1.0 / (n * ACTION_DIM as f64);
    let mut loss = 0.0;
    let mut cache = Cache::default();
    let mut grads = grads;
    for (features, target) in batch {
        let out = policy.forward_cached(features, &mut cache);
        let mut g = [0.0; 2 * ACTION_DIM];
        for d in 0..ACTION_DIM {
            let t = out[d].tanh();
            loss += (t - target[d]).powi(2) * scale;
            g[d] = weight * scale * 2.0 * (t - target[d]) * (1.0 - t * t);
        }
        if let Some(gp) = grads.as_mut() {
            policy.backward(&cache, &g, gp, None);
        }
    }
    loss
}

/// Discriminator input: observation features followed by the normalized action.
pub fn disc_input(features: &[f64], action: &[f64; ACTION_DIM]) -> Vec<f64> {
    let mut x = Vec::with_capacity(features.len() + ACTION_DIM);
    x.extend_from_slice(features);
    x.extend_from_slice(action);
    x
}

/// Discriminator probability that a pair came from the expert, clipped into
/// `[D_CLIP, 1 - D_CLIP]`.
pub fn disc_prob(disc: &Mlp<f64>, input: &[f64]) -> f64 {
    sigmoid(disc.forward(input)[0]).clamp(D_CLIP, 1.0 - D_CLIP)
}

/// Imitation reward `-ln(1 - D)`.
pub fn gail_reward_from_prob(d: f64) -> f64 {
    -(1.0 - d.clamp(D_CLIP, 1.0 - D_CLIP)).ln()
}

pub fn gail_reward(disc: &Mlp<f64>, input: &[f64]) -> f64 {
    gail_reward_from_prob(disc_prob(disc, input))
}

/// Binary cross-entropy with expert pairs labelled 1 and policy pairs 0,
/// averaged over all pairs.
pub fn gail_loss(disc: &Mlp<f64>, demo: &[&[f64]], policy: &[&[f64]], weight: f64, grads: Option<&mut [f64]>) -> f64 {
    let n = (demo.len() + policy.len()).max(1) as f64;
    let mut loss = 0.0;
    let mut cache = Cache::default();
    let mut grads = grads;
    for (inputs, expert) in [(demo, true), (policy, false)] {
        for x in inputs {
            let z = disc.forward_cached(x, &mut cache)[0];
            let (l, dz) = if expert { (softplus(-z), sigmoid(z) - 1.0) } else { (softplus(z), sigmoid(z)) };
            loss += l / n;
            if let Some(g) = grads.as_mut() {
                disc.backward(&cache, &[weight * dz / n], g, None);
            }
        }
    }
    loss
}

/// One discriminator step on the given batches; returns the loss before the
/// step.
pub fn gail_update(disc: &mut Mlp<f64>, opt: &mut Adam<f64>, demo: &[&[f64]], policy: &[&[f64]], weight: f64) -> f64 {
    let mut g = vec![0.0; disc.num_params()];
    let loss = gail_loss(disc, demo, policy, weight, Some(&mut g));
    opt.step(&mut disc.params, &g);
    loss
}

/// Feature encoder, forward model and inverse model of the curiosity module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuriosityNets {
    pub encoder: Mlp<f64>,
    pub forward: Mlp<f64>,
    pub inverse: Mlp<f64>,
}

impl CuriosityNets {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, features: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            encoder: Mlp::random(&[obs_dim, hidden, features], 1.0, rng)?,
            forward: Mlp::random(&[features + ACTION_DIM, hidden, features], 1.0, rng)?,
            inverse: Mlp::random(&[2 * features, hidden, ACTION_DIM], 1.0, rng)?,
        })
    }

    pub fn encode(&self, obs: &[f64]) -> Vec<f64> {
        self.encoder.forward(obs)
    }

    /// `0.5 * |predicted next feature - actual next feature|^2`.
    pub fn forward_error(&self, obs: &[f64], next: &[f64], action: &[f64; ACTION_DIM]) -> f64 {
        let phi = self.encode(obs);
        let target = self.encode(next);
        let pred = self.forward.forward(&disc_input(&phi, action));
        forward_loss(&pred, &target)
    }
}

pub fn forward_loss(pred: &[f64], target: &[f64]) -> f64 {
    0.5 * pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Intrinsic reward: `scale` times the forward-model error.
pub fn intrinsic_reward(nets: &CuriosityNets, obs: &[f64], next: &[f64], action: &[f64; ACTION_DIM], scale: f64) -> f64 {
    scale * nets.forward_error(obs, next, action)
}

#[derive(Debug, Clone, Copy)]
pub struct CuriositySample<'a> {
    pub obs: &'a [f64],
    pub next: &'a [f64],
    pub action: [f64; ACTION_DIM],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CuriosityTerms {
    pub inverse: f64,
    pub forward: f64,
    /// `w * inverse + (1 - w) * forward`
    pub loss: f64,
}

pub struct CuriosityGrads<'a> {
    pub encoder: &'a mut [f64],
    pub forward: &'a mut [f64],
    pub inverse: &'a mut [f64],
}

/// Inverse loss (MSE of the predicted action) trains the inverse model and
/// the encoder; forward loss trains only the forward model (features are
/// treated as constants there).
pub fn curiosity_loss(
    nets: &CuriosityNets,
    batch: &[CuriositySample<'_>],
    inverse_weight: f64,
    weight: f64,
    grads: Option<CuriosityGrads<'_>>,
) -> CuriosityTerms {
    let n = batch.len().max(1) as f64;
    let k = nets.encoder.output_dim();
    let (mut ce, mut ce1, mut ci, mut cf) = (Cache::default(), Cache::default(), Cache::default(), Cache::default());
    let mut terms = CuriosityTerms::default();
    let mut grads = grads;
    let mut g_in = Vec::new();
    for s in batch {
        let phi = nets.encoder.forward_cached(s.obs, &mut ce).to_vec();
        let phi1 = nets.encoder.forward_cached(s.next, &mut ce1).to_vec();
        let mut inv_in = phi.clone();
        inv_in.extend_from_slice(&phi1);
        let pred_a = nets.inverse.forward_cached(&inv_in, &mut ci).to_vec();
        let inv: f64 = pred_a.iter().zip(&s.action).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / ACTION_DIM as f64;
        let pred_phi = nets.forward.forward_cached(&disc_input(&phi, &s.action), &mut cf).to_vec();
        let fwd = forward_loss(&pred_phi, &phi1);
        terms.inverse += inv / n;
        terms.forward += fwd / n;
        if let Some(g) = grads.as_mut() {
            let wi = weight * inverse_weight / n;
            let wf = weight * (1.0 - inverse_weight) / n;
            let ga: Vec<f64> = pred_a.iter().zip(&s.action).map(|(p, a)| wi * 2.0 * (p - a) / ACTION_DIM as f64).collect();
            nets.inverse.backward(&ci, &ga, g.inverse, Some(&mut g_in));
            nets.encoder.backward(&ce, &g_in[..k], g.encoder, None);
            nets.encoder.backward(&ce1, &g_in[k..], g.encoder, None);
            let gf: Vec<f64> = pred_phi.iter().zip(&phi1).map(|(p, t)| wf * (p - t)).collect();
            nets.forward.backward(&cf, &gf, g.forward, None);
        }
    }
    terms.loss = inverse_weight * terms.inverse + (1.0 - inverse_weight) * terms.forward;
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate(1.0, 2.0, 0.2).0, -2.0);
        assert_eq!(clipped_surrogate(1.5, 2.0, 0.2).0, -1.2 * 2.0);
        assert_eq!(clipped_surrogate(1.5, 2.0, 0.2).1, 0.0);
        // negative advantage keeps the pessimistic unclipped branch
        assert_eq!(clipped_surrogate(1.5, -1.0, 0.2).0, 1.5);
    }

    #[test]
    fn gail_reward_values() {
        assert!((gail_reward_from_prob(0.5) - 2f64.ln()).abs() < 1e-15);
        assert!((gail_reward_from_prob(0.9) - 10f64.ln()).abs() < 1e-12);
        assert!(gail_reward_from_prob(0.0) < 1e-6);
        assert!(gail_reward_from_prob(1.0).is_finite());
    }

    #[test]
    fn uninformative_discriminator_loss_is_ln2() {
        let disc = Mlp::<f64>::zeros(&[4, 8, 1]).unwrap();
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [-1.0, 0.0, 2.0, 0.5];
        let l = gail_loss(&disc, &[&a], &[&b, &a], 1.0, None);
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }
}
