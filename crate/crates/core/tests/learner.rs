use std::sync::Arc;

use cathnav::demonstrations::{meta_for, record, Demonstration, ScriptedExpert};
use cathnav::environment::*;
use cathnav::learner::checkpoint::Optimizers;
use cathnav::learner::curriculum::{CurriculumConfig, CurriculumState};
use cathnav::learner::losses::*;
use cathnav::learner::policy::*;
use cathnav::learner::*;
use cathnav::nn::{Adam, Mlp};
use cathnav::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS: usize = 6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn features(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..OBS).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn action(r: &mut ChaCha8Rng) -> [f64; ACTION_DIM] {
    std::array::from_fn(|_| r.random_range(-0.9..0.9))
}

/// Central differences of `loss` at 5 random parameters compared with `grads`.
fn check_gradient(label: &str, params: &[f64], grads: &[f64], r: &mut ChaCha8Rng, loss: impl Fn(&[f64]) -> f64) {
    let h = 1e-5;
    let mut probed = 0;
    let mut tries = 0;
    while probed < 5 {
        tries += 1;
        assert!(tries < 500, "{label}: no parameter with a measurable gradient");
        let i = r.random_range(0..params.len());
        let mut p = params.to_vec();
        p[i] += h;
        let up = loss(&p);
        p[i] -= 2.0 * h;
        let down = loss(&p);
        let fd = (up - down) / (2.0 * h);
        if fd.abs().max(grads[i].abs()) < 1e-6 {
            continue;
        }
        let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs());
        assert!(rel < 1e-4, "{label} param {i}: fd {fd} analytic {}", grads[i]);
        probed += 1;
    }
}

#[test]
fn ppo_gradients_match_finite_differences() {
    let mut r = rng(1);
    let policy = Mlp::<f64>::random(&[OBS, 8, 2 * ACTION_DIM], 1.0, &mut r).unwrap();
    let value = Mlp::<f64>::random(&[OBS, 8, VALUE_HEADS], 1.0, &mut r).unwrap();
    let xs = features(&mut r, 6);
    let samples: Vec<PpoSample<'_>> = xs
        .iter()
        .map(|x| {
            let (mean, log_std) = gaussian_head(&policy.forward(x));
            let u: [f64; ACTION_DIM] = std::array::from_fn(|d| mean[d] + 0.3 * r.random_range(-1.0..1.0));
            PpoSample {
                features: x,
                u,
                old_log_prob: log_prob(&u, &mean, &log_std) + r.random_range(-0.4..0.4),
                advantage: r.random_range(-2.0..2.0),
                returns: std::array::from_fn(|_| r.random_range(-1.0..1.0)),
            }
        })
        .collect();
    let p = PpoParams { clip_ratio: 0.2, beta: 0.01, value_coef: 0.5 };
    let w = 0.7;
    let mut gp = vec![0.0; policy.num_params()];
    let mut gv = vec![0.0; value.num_params()];
    ppo_loss(&policy, &value, &samples, &p, w, Some((&mut gp, &mut gv)));
    check_gradient("policy", &policy.params, &gp, &mut r, |q| {
        let net = Mlp::from_params(policy.sizes(), q.to_vec()).unwrap();
        w * ppo_loss(&net, &value, &samples, &p, 1.0, None).loss
    });
    check_gradient("value", &value.params, &gv, &mut r, |q| {
        let net = Mlp::from_params(value.sizes(), q.to_vec()).unwrap();
        w * ppo_loss(&policy, &net, &samples, &p, 1.0, None).loss
    });
}

#[test]
fn bc_gradient_matches_finite_differences() {
    let mut r = rng(2);
    let policy = Mlp::<f64>::random(&[OBS, 8, 2 * ACTION_DIM], 1.0, &mut r).unwrap();
    let xs = features(&mut r, 5);
    let batch: Vec<(&[f64], [f64; ACTION_DIM])> = xs.iter().map(|x| (x.as_slice(), action(&mut r))).collect();
    let mut g = vec![0.0; policy.num_params()];
    bc_loss(&policy, &batch, 0.3, Some(&mut g));
    check_gradient("bc", &policy.params, &g, &mut r, |q| {
        0.3 * bc_loss(&Mlp::from_params(policy.sizes(), q.to_vec()).unwrap(), &batch, 1.0, None)
    });
}

#[test]
fn discriminator_gradient_matches_finite_differences() {
    let mut r = rng(3);
    let disc = Mlp::<f64>::random(&[OBS + ACTION_DIM, 8, 1], 1.0, &mut r).unwrap();
    let mk = |r: &mut ChaCha8Rng| -> Vec<Vec<f64>> { features(r, 5).iter().map(|x| disc_input(x, &action(r))).collect() };
    let (demo, pol) = (mk(&mut r), mk(&mut r));
    let dr: Vec<&[f64]> = demo.iter().map(Vec::as_slice).collect();
    let pr: Vec<&[f64]> = pol.iter().map(Vec::as_slice).collect();
    let mut g = vec![0.0; disc.num_params()];
    gail_loss(&disc, &dr, &pr, 0.8, Some(&mut g));
    check_gradient("discriminator", &disc.params, &g, &mut r, |q| {
        0.8 * gail_loss(&Mlp::from_params(disc.sizes(), q.to_vec()).unwrap(), &dr, &pr, 1.0, None)
    });
}

#[test]
fn curiosity_gradients_match_finite_differences() {
    let mut r = rng(4);
    let nets = CuriosityNets::new(OBS, 4, 8, &mut r).unwrap();
    let xs = features(&mut r, 10);
    let batch: Vec<CuriositySample<'_>> =
        (0..5).map(|k| CuriositySample { obs: &xs[2 * k], next: &xs[2 * k + 1], action: action(&mut r) }).collect();
    let (w, wi) = (0.5, 0.8);
    let mut ge = vec![0.0; nets.encoder.num_params()];
    let mut gf = vec![0.0; nets.forward.num_params()];
    let mut gi = vec![0.0; nets.inverse.num_params()];
    curiosity_loss(&nets, &batch, wi, w, Some(CuriosityGrads { encoder: &mut ge, forward: &mut gf, inverse: &mut gi }));
    let with = |f: &dyn Fn(&mut CuriosityNets)| {
        let mut n = CuriosityNets { encoder: nets.encoder.clone(), forward: nets.forward.clone(), inverse: nets.inverse.clone() };
        f(&mut n);
        n
    };
    check_gradient("forward", &nets.forward.params, &gf, &mut r, |q| {
        let n = with(&|n| n.forward.params = q.to_vec());
        w * curiosity_loss(&n, &batch, wi, 1.0, None).loss
    });
    check_gradient("inverse", &nets.inverse.params, &gi, &mut r, |q| {
        let n = with(&|n| n.inverse.params = q.to_vec());
        w * curiosity_loss(&n, &batch, wi, 1.0, None).loss
    });
    // the encoder learns only from the inverse model
    check_gradient("encoder", &nets.encoder.params, &ge, &mut r, |q| {
        let n = with(&|n| n.encoder.params = q.to_vec());
        w * wi * curiosity_loss(&n, &batch, wi, 1.0, None).inverse
    });
}

#[test]
fn total_loss_examples() {
    let cfg = TrainConfig::default();
    assert!((total_loss(1.0, 1.0, 1.0, 1.0, &cfg) - 1.02).abs() < 1e-12);
    assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, &cfg), 0.0);
    let mu0 = TrainConfig { mu: 0.0, ..cfg.clone() };
    assert!((total_loss(1.0, 1.0, 1.0, 1.0, &mu0) - 1.02).abs() < 1e-12);
    assert_eq!(total_loss(0.0, 0.0, 123.0, 0.0, &mu0), 0.0);
}

proptest! {
    #[test]
    fn total_loss_is_linear(terms in prop::array::uniform4(-10.0..10.0f64), k in 0.0..2.0f64, l in 0.0..2.0f64, m in 0.0..1.0f64, n in 0.0..2.0f64) {
        let cfg = TrainConfig { kappa: k, lambda: l, mu: m, nu: n, ..Default::default() };
        let [a, b, c, d] = terms;
        let expected = k * (1.0 - m) * a + l * b + k * m * c + n * d;
        prop_assert!((total_loss(a, b, c, d, &cfg) - expected).abs() < 1e-12);
        let h = 1e-3;
        let slope = (total_loss(a + h, b, c, d, &cfg) - total_loss(a - h, b, c, d, &cfg)) / (2.0 * h);
        prop_assert!((slope - k * (1.0 - m)).abs() < 1e-9);
    }
}

#[test]
fn ppo_examples() {
    let policy = Mlp::<f64>::zeros(&[OBS, 4, 2 * ACTION_DIM]).unwrap();
    let value = Mlp::<f64>::zeros(&[OBS, 4, VALUE_HEADS]).unwrap();
    let x = vec![0.1; OBS];
    let u = [0.2, -0.1, 0.3];
    let lp = log_prob(&u, &[0.0; 3], &[0.0; 3]);
    let p = PpoParams { clip_ratio: 0.2, beta: 5e-4, value_coef: 0.5 };
    let adv = [1.5, -0.5, 2.0];
    let batch: Vec<_> = adv.iter().map(|&a| PpoSample { features: &x, u, old_log_prob: lp, advantage: a, returns: [0.0; 3] }).collect();
    let t = ppo_loss(&policy, &value, &batch, &p, 1.0, None);
    assert!((t.surrogate + adv.iter().sum::<f64>() / 3.0).abs() < 1e-12);

    let flat: Vec<_> = batch.iter().map(|s| PpoSample { advantage: 0.0, returns: [1.0, 2.0, 0.0], ..*s }).collect();
    let t = ppo_loss(&policy, &value, &flat, &p, 1.0, None);
    assert_eq!(t.surrogate, 0.0);
    assert!((t.value - 0.5 * 5.0).abs() < 1e-12);
    assert!((t.loss - (t.value - 5e-4 * entropy(&[0.0; 3]))).abs() < 1e-12);

    let ratio = 1.5f64;
    let boosted: Vec<_> = batch.iter().map(|s| PpoSample { old_log_prob: lp - ratio.ln(), advantage: 2.0, ..*s }).collect();
    let t = ppo_loss(&policy, &value, &boosted, &p, 1.0, None);
    assert!((t.surrogate + 1.2 * 2.0).abs() < 1e-12);
}

#[test]
fn gail_examples() {
    let half = Mlp::<f64>::zeros(&[OBS + ACTION_DIM, 4, 1]).unwrap();
    let x = disc_input(&[0.0; OBS], &[0.0; 3]);
    assert_eq!(disc_prob(&half, &x), 0.5);
    assert!((gail_reward(&half, &x) - 0.6931).abs() < 1e-4);
    assert!((gail_loss(&half, &[&x], &[&x], 1.0, None) - 2f64.ln()).abs() < 1e-12);
    assert!((gail_reward_from_prob(0.9) - 2.3026).abs() < 1e-4);
    assert!(gail_reward_from_prob(1e-12) < 1e-6);

    let mut r = rng(5);
    let xs: Vec<Vec<f64>> = features(&mut r, 16).iter().map(|f| disc_input(f, &action(&mut r))).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let mut disc = Mlp::<f64>::random(&[OBS + ACTION_DIM, 16, 1], 1.0, &mut r).unwrap();
    let mut opt = Adam::new(disc.num_params(), 1e-2);
    for _ in 0..500 {
        gail_update(&mut disc, &mut opt, &refs, &refs, 1.0);
    }
    // the best response to identical batches is D = 1/2 everywhere
    let loss = gail_loss(&disc, &refs, &refs, 1.0, None);
    assert!(loss >= 2f64.ln() - 1e-12);
    assert!(loss < 2f64.ln() + 1e-3);
    assert!(refs.iter().all(|x| (disc_prob(&disc, x) - 0.5).abs() < 0.05));

    let demo: Vec<Vec<f64>> = (0..8).map(|k| disc_input(&[1.0; OBS], &[0.1 * k as f64 / 8.0, 0.0, 0.0])).collect();
    let pol: Vec<Vec<f64>> = (0..8).map(|k| disc_input(&[-1.0; OBS], &[0.1 * k as f64 / 8.0, 0.0, 0.0])).collect();
    let dr: Vec<&[f64]> = demo.iter().map(Vec::as_slice).collect();
    let pr: Vec<&[f64]> = pol.iter().map(Vec::as_slice).collect();
    let mut disc = Mlp::<f64>::random(&[OBS + ACTION_DIM, 16, 1], 1.0, &mut r).unwrap();
    let mut opt = Adam::new(disc.num_params(), 1e-2);
    for _ in 0..1000 {
        gail_update(&mut disc, &mut opt, &dr, &pr, 1.0);
    }
    assert!(gail_loss(&disc, &dr, &pr, 1.0, None) < 1e-2);
    assert!(dr.iter().chain(&pr).all(|x| {
        let d = disc_prob(&disc, x);
        d > 0.0 && d < 1.0
    }));
}

#[test]
fn bc_examples() {
    let mut r = rng(6);
    let mut policy = Mlp::<f64>::zeros(&[OBS, 4, 2 * ACTION_DIM]).unwrap();
    let xs = features(&mut r, 4);
    let zero: Vec<(&[f64], [f64; 3])> = xs.iter().map(|x| (x.as_slice(), [0.0; 3])).collect();
    assert_eq!(bc_loss(&policy, &zero, 1.0, None), 0.0);
    let delta = 0.3;
    let shifted: Vec<(&[f64], [f64; 3])> = xs.iter().map(|x| (x.as_slice(), [delta; 3])).collect();
    assert!((bc_loss(&policy, &shifted, 1.0, None) - delta * delta).abs() < 1e-15);
    policy = Mlp::random(&[OBS, 4, 2 * ACTION_DIM], 1.0, &mut r).unwrap();
    let demos: Vec<(&[f64], [f64; 3])> = xs.iter().map(|x| (x.as_slice(), action(&mut r))).collect();
    assert!(bc_loss(&policy, &demos, 1.0, None) > 0.0);
}

#[test]
fn curiosity_examples() {
    let mut r = rng(7);
    let mut nets = CuriosityNets::new(OBS, 4, 8, &mut r).unwrap();
    let (o, o1) = (vec![0.2; OBS], vec![0.5; OBS]);
    let a = [0.1, 0.0, -0.2];
    // set the forward model to output exactly phi(o_{t+1}) through its bias
    let phi1 = nets.encode(&o1);
    let k = phi1.len();
    nets.forward.params.iter_mut().for_each(|p| *p = 0.0);
    let n = nets.forward.num_params();
    nets.forward.params[n - k..].copy_from_slice(&phi1);
    assert_eq!(intrinsic_reward(&nets, &o, &o1, &a, 0.01), 0.0);

    let id = CuriosityNets {
        encoder: identity(OBS),
        forward: passthrough(OBS),
        inverse: Mlp::zeros(&[2 * OBS, 4, ACTION_DIM]).unwrap(),
    };
    let same = [0.3, -0.1, 0.7, 0.0, 0.2, 0.1];
    assert!(id.forward_error(&same, &same, &a).abs() < 1e-24);

    let mut r = rng(8);
    let mut nets = CuriosityNets::new(OBS, 4, 16, &mut r).unwrap();
    let (s0, s1) = (vec![0.5; OBS], vec![-0.5; OBS]);
    let novel = vec![0.9, -0.9, 0.9, -0.9, 0.9, -0.9];
    let batch = [CuriositySample { obs: &s0, next: &s1, action: a }, CuriositySample { obs: &s1, next: &s0, action: [-0.1, 0.0, 0.2] }];
    let mut opts = Optimizers::new(&nets.encoder, &nets.encoder, &nets.encoder, &nets, 1e-2);
    for _ in 0..2000 {
        let mut ge = vec![0.0; nets.encoder.num_params()];
        let mut gf = vec![0.0; nets.forward.num_params()];
        let mut gi = vec![0.0; nets.inverse.num_params()];
        curiosity_loss(&nets, &batch, 0.8, 1.0, Some(CuriosityGrads { encoder: &mut ge, forward: &mut gf, inverse: &mut gi }));
        opts.encoder.step(&mut nets.encoder.params, &ge);
        opts.forward.step(&mut nets.forward.params, &gf);
        opts.inverse.step(&mut nets.inverse.params, &gi);
    }
    let familiar = intrinsic_reward(&nets, &s0, &s1, &a, 0.01);
    let surprise = intrinsic_reward(&nets, &s0, &novel, &a, 0.01);
    assert!(surprise > familiar, "{surprise} vs {familiar}");
}

/// Swish network computing the identity on inputs well inside the linear
/// regime is not exact, so this uses a linear single-layer pass instead.
fn identity(n: usize) -> Mlp<f64> {
    let mut p = vec![0.0; n * n + n];
    (0..n).for_each(|i| p[i * n + i] = 1.0);
    Mlp::from_params(&[n, n], p).unwrap()
}

/// Linear map `(phi, action) -> phi`.
fn passthrough(n: usize) -> Mlp<f64> {
    let m = n + ACTION_DIM;
    let mut p = vec![0.0; m * n + n];
    (0..n).for_each(|i| p[i * m + i] = 1.0);
    Mlp::from_params(&[m, n], p).unwrap()
}

#[test]
fn curriculum_examples() {
    let cfg = CurriculumConfig { window: 3, thresholds: vec![0.5], decay: 0.8, initial_factor: 2.0, enabled: true };
    let phys = 0.6;
    let s = CurriculumState::new(&cfg, phys);
    assert_eq!(s.current_theta_max, 2.0 * phys);
    let below = s.update(0.1).update(0.2).update(0.3);
    assert_eq!((below.lesson, below.current_theta_max), (0, 2.0 * phys));
    let met = s.update(0.5).update(0.6).update(0.7);
    assert_eq!(met.lesson, 1);
    assert!((met.current_theta_max - 1.6 * phys).abs() < 1e-15);
    let mut st = s;
    for _ in 0..200 {
        st = st.update(1.0);
        assert!(st.current_theta_max >= phys);
    }
    assert_eq!(st.current_theta_max, phys);
    assert!(st.is_final());
    let off = CurriculumState::new(&CurriculumConfig { enabled: false, ..cfg }, phys);
    assert_eq!(off.current_theta_max, phys);
}

proptest! {
    #[test]
    fn curriculum_is_monotone(rewards in prop::collection::vec(-2.0..2.0f64, 0..400), phys in 0.1..1.5f64, window in 1usize..10, decay in 0.1..0.95f64) {
        let cfg = CurriculumConfig { window, decay, ..Default::default() };
        let mut s = CurriculumState::new(&cfg, phys);
        for r in rewards {
            let next = s.update(r);
            prop_assert!(next.current_theta_max <= s.current_theta_max);
            prop_assert!(next.current_theta_max >= phys);
            prop_assert!(next.lesson >= s.lesson);
            s = next;
        }
    }
}

#[test]
fn policy_act_examples() {
    let spec = cathnav::kinematics::CatheterSpec::default();
    let scale = ActionScale::for_spec(&spec, spec.theta_max);
    let zero = Mlp::<f64>::zeros(&[OBS, 4, 2 * ACTION_DIM]).unwrap();
    let x = vec![0.3; OBS];
    let mean = policy_mean(&zero, &scale, &x).unwrap();
    assert_eq!((mean.alpha, mean.gamma), (0.0, 0.0));
    assert_eq!(mean.insertion, 0.5 * spec.max_step());

    let mut r = rng(9);
    let net = Mlp::<f64>::random(&[OBS, 8, 2 * ACTION_DIM], 1.0, &mut r).unwrap();
    let run = |seed| {
        let mut r = rng(seed);
        (0..20).map(|_| policy_act(&net, &scale, &x, &mut r).unwrap().action).collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));

    let m = [0.4, -1.2, 0.1];
    let u = gaussian_sample(&m, &[-60.0; 3], &[2.0, -1.5, 0.7]);
    assert_eq!(squash(&u), squash(&m));

    let mut bad = net.clone();
    bad.params[0] = f64::NAN;
    let mut r = rng(0);
    assert!(matches!(policy_act(&bad, &scale, &x, &mut r), Err(Error::TrainingDiverged(_))));

    for s in run(5) {
        assert!(s.insertion >= 0.0 && s.insertion <= spec.max_step());
        assert!(s.alpha.abs() <= scale.bend && s.gamma.abs() <= scale.bend);
    }
    let a = scale.to_env([0.25, -0.5, 0.0]);
    assert_eq!(scale.to_normalized(&a), [0.25, -0.5, 0.0]);
}

fn demos(sc: &Arc<Scenario>, n: usize, noise: f64, seed: u64) -> Vec<Demonstration> {
    let mut env = Environment::new(sc.clone());
    let mut r = SimRng::seed_from_u64(seed);
    let mut expert = ScriptedExpert::new(sc.spaces.centerline.clone(), sc.file.catheter, noise);
    (0..n)
        .map(|_| {
            let meta = meta_for(&env, "scripted", None);
            record(&mut env, &mut expert, &mut r, meta).unwrap()
        })
        .collect()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig { max_steps: 1024, buffer_size: 256, batch_size: 64, learning_rate: 1e-3, seed, ..Default::default() }
}

#[test]
fn training_is_deterministic_and_resumable() {
    let sc = toy::straight();
    let d = demos(&sc, 4, 0.3, 0);
    let run = || {
        let mut t = Trainer::new(sc.clone(), &d, small_config(3)).unwrap();
        t.train(|_, _| Ok(())).unwrap();
        t
    };
    let a = run();
    let b = run();
    assert_eq!(a.log, b.log);
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.log.len(), 4);
    assert_eq!(a.log.last().unwrap().env_steps, 1024);
    // one iteration consumes exactly buffer_size environment steps
    assert!(a.log.iter().enumerate().all(|(i, row)| row.env_steps == 256 * (i + 1)));

    let mut first = Trainer::new(sc.clone(), &d, small_config(3)).unwrap();
    first.iterate().unwrap();
    first.iterate().unwrap();
    let ck = Checkpoint::from_json(&first.checkpoint().to_json()).unwrap();
    let mut resumed = Trainer::resume(sc.clone(), &d, &ck).unwrap();
    resumed.train(|_, _| Ok(())).unwrap();
    assert_eq!(resumed.log[..], a.log[2..]);
    assert_eq!(resumed.policy, a.policy);
    assert_eq!(resumed.checkpoint(), a.checkpoint());
}

#[test]
fn checkpoint_mismatches_are_schema_errors() {
    let sc = toy::straight();
    let d = demos(&sc, 2, 0.0, 1);
    let t = Trainer::new(sc.clone(), &d, small_config(0)).unwrap();
    let ck = t.checkpoint();
    assert!(matches!(Trainer::resume(toy::curved(), &d, &ck), Err(Error::Schema(_))));
    let mut tampered = ck.clone();
    tampered.config.seed = 99;
    assert!(matches!(Checkpoint::from_json(&tampered.to_json()), Err(Error::Schema(_))));
    let mut wrong = d[0].clone();
    wrong.meta.schema_hash = "x".into();
    assert!(matches!(Trainer::new(sc.clone(), &[wrong], small_config(0)), Err(Error::Schema(_))));
    let mut failed = d[0].clone();
    failed.outcome = false;
    assert!(matches!(Trainer::new(sc, &[failed], small_config(0)), Err(Error::Config(_))));
}

#[test]
fn pure_behavior_cloning_reduces_the_bc_loss() {
    let sc = toy::straight();
    let d = demos(&sc, 6, 0.3, 2);
    let cfg = TrainConfig { kappa: 1.0, mu: 1.0, lambda: 0.0, nu: 0.0, max_steps: 256 * 12, ..small_config(1) };
    let mut t = Trainer::new(sc, &d, cfg).unwrap();
    t.train(|_, _| Ok(())).unwrap();
    let bc: Vec<f64> = t.log.iter().map(|r| r.l_bc).collect();
    // minibatches resample demonstrations, so allow a little noise
    for w in bc.windows(2) {
        assert!(w[1] <= w[0] * 1.1, "{bc:?}");
    }
    assert!(bc[bc.len() - 1] < 0.6 * bc[0], "{bc:?}");
}

#[test]
fn curriculum_only_tightens_during_training() {
    let sc = toy::straight();
    let d = demos(&sc, 4, 0.3, 3);
    let cfg = TrainConfig {
        curriculum: CurriculumConfig { window: 2, thresholds: vec![-10.0], ..Default::default() },
        ..small_config(2)
    };
    let mut t = Trainer::new(sc.clone(), &d, cfg).unwrap();
    t.train(|_, _| Ok(())).unwrap();
    let thetas: Vec<f64> = t.log.iter().map(|r| r.theta_max_current).collect();
    assert!(thetas.windows(2).all(|w| w[1] <= w[0]));
    let phys = sc.file.catheter.theta_max;
    assert!(thetas.iter().all(|&x| x >= phys));
    assert!(*thetas.last().unwrap() < t.config.curriculum.initial_factor * phys);
}

#[test]
fn executed_actions_respect_the_current_bend_limit() {
    let sc = toy::curved();
    let spec = sc.file.catheter;
    let mut env = Environment::new(sc);
    let mut r = SimRng::seed_from_u64(0);
    for theta in [2.0 * spec.theta_max, 1.6 * spec.theta_max, spec.theta_max] {
        env.set_theta_max(theta);
        env.reset(&mut r);
        let relaxed = spec.with_theta_max(theta);
        for _ in 0..50 {
            let s = env.step(&Action::new(5.0, -5.0, 0.3)).unwrap();
            let bound = cathnav::kinematics::max_bend_at_step(&relaxed, 0.3).unwrap();
            assert!(s.action.alpha.abs() <= bound + 1e-12 && s.action.gamma.abs() <= bound + 1e-12);
            if s.done {
                break;
            }
        }
    }
}

use cathnav::kinematics::Action;

#[test]
fn trained_policy_beats_an_untrained_one_in_the_straight_tube() {
    let sc = toy::straight();
    let d = demos(&sc, 30, 0.5, 1000);
    let successes = |p: &mut dyn Policy| evaluate(sc.clone(), p, 20, 777).unwrap().iter().filter(|r| r.success).count();
    let (mut trained, mut untrained) = (0, 0);
    for seed in 0..5 {
        let cfg = TrainConfig { max_steps: 50_000, buffer_size: 2048, batch_size: 128, learning_rate: 1e-3, seed, ..Default::default() };
        let mut t = Trainer::new(sc.clone(), &d, cfg).unwrap();
        // an untrained policy is its initial sampling distribution
        untrained += successes(&mut t.learned_policy(false));
        t.train(|_, _| Ok(())).unwrap();
        trained += successes(&mut t.learned_policy(false));
    }
    assert!(trained > untrained, "trained {trained} vs untrained {untrained}");
}
