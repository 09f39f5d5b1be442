//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cathnav::environment::reward::{step_reward, RewardConfig, StepEvent};
use cathnav::environment::SimRng;
use cathnav::geometry::{TubeBuilder, Vec3};
use cathnav::kinematics::{clamp_action, Action, CatheterSpec};
use cathnav::learner::log::read_log;
use cathnav::learner::losses::*;
use cathnav::learner::policy::{gaussian_head, log_prob, ACTION_DIM};
use cathnav::learner::{total_loss, TrainConfig};
use cathnav::metrics::{curvature, kruskal_wallis, success_rate, tracking_error};
use cathnav::nn::Mlp;
use cathnav::softbody::*;
use cathnav_cli::args::{DemosArgs, EvaluateArgs, TrainArgs};
use cathnav_cli::commands::{cmd_demos, cmd_evaluate, cmd_train, LOG_FILE};
use cathnav_cli::report::EvaluationReport;
use rand::{Rng, SeedableRng};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EPISODES: usize = 100;
const EVAL_SEED: u64 = 10_000;
const VARIANTS: [(&str, &str); 4] = [("full", ""), ("mu=0", "mu = 0.0\n"), ("lambda=0", "lambda = 0.0\n"), ("nu=0", "nu = 0.0\n")];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reward_arithmetic() -> Outcome {
    let cfg = RewardConfig::default();
    let r = |e: StepEvent| step_reward(&cfg, &e).map_err(|e| e.to_string());
    let idle = r(StepEvent::default())?;
    let collided = r(StepEvent { collided_non_minor: true, ..Default::default() })?;
    let reached = r(StepEvent { reached_target: true, waypoint_hit: true, ..Default::default() })?;
    check(
        idle == -1e-5 && collided == -1.0 + -1e-5 && reached == 1.0 + -1e-5 + 0.05,
        format!("idle {idle}, collision {collided}, target+waypoint {reached}"),
    )
}

fn bend_bound() -> Outcome {
    let mut rng = SimRng::seed_from_u64(1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let spec = CatheterSpec {
            segment_length: rng.random_range(5.0..100.0),
            theta_max: rng.random_range(0.01..std::f64::consts::PI),
            outer_diameter: rng.random_range(1.0..10.0),
            v_max: rng.random_range(0.5..20.0),
            dt: rng.random_range(0.01..1.0),
        };
        let raw = Action::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-5.0..30.0));
        let a = clamp_action(&spec, &raw);
        let bound = spec.theta_max * a.insertion / spec.segment_length;
        worst = worst.max(a.alpha.abs() - bound).max(a.gamma.abs() - bound);
    }
    check(worst <= 1e-12, format!("max excess over the bound {worst:e} on 1e5 pairs"))
}

fn loss_linearity() -> Outcome {
    let mut rng = SimRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let cfg = TrainConfig {
            kappa: rng.random_range(0.0..2.0),
            lambda: rng.random_range(0.0..2.0),
            mu: rng.random_range(0.0..1.0),
            nu: rng.random_range(0.0..2.0),
            ..Default::default()
        };
        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let expected = cfg.kappa * (1.0 - cfg.mu) * t[0] + cfg.lambda * t[1] + cfg.kappa * cfg.mu * t[2] + cfg.nu * t[3];
        worst = worst.max((total_loss(t[0], t[1], t[2], t[3], &cfg) - expected).abs());
    }
    let ones = total_loss(1.0, 1.0, 1.0, 1.0, &TrainConfig::default());
    check(worst < 1e-12 && (ones - 1.02).abs() < 1e-12, format!("max deviation {worst:e} on 1e4 vectors, all-ones {ones}"))
}

/// Largest relative error between central differences and `grads` over 5
/// parameters with a measurable gradient.
fn fd_error(params: &[f64], grads: &[f64], rng: &mut SimRng, loss: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let (mut probed, mut worst) = (0, 0.0f64);
    for _ in 0..500 {
        let i = rng.random_range(0..params.len());
        let mut p = params.to_vec();
        p[i] += h;
        let up = loss(&p);
        p[i] -= 2.0 * h;
        let fd = (up - loss(&p)) / (2.0 * h);
        let scale = fd.abs().max(grads[i].abs());
        if scale < 1e-6 {
            continue;
        }
        worst = worst.max((fd - grads[i]).abs() / scale);
        probed += 1;
        if probed == 5 {
            return worst;
        }
    }
    f64::INFINITY
}

fn gradients() -> Outcome {
    const OBS: usize = 6;
    let mut r = SimRng::seed_from_u64(3);
    let feats = |r: &mut SimRng, n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..OBS).map(|_| r.random_range(-1.0..1.0)).collect()).collect() };
    let act = |r: &mut SimRng| -> [f64; ACTION_DIM] { std::array::from_fn(|_| r.random_range(-0.9..0.9)) };
    let mut errors = Vec::new();

    let policy = Mlp::<f64>::random(&[OBS, 8, 2 * ACTION_DIM], 1.0, &mut r).map_err(|e| e.to_string())?;
    let value = Mlp::<f64>::random(&[OBS, 8, VALUE_HEADS], 1.0, &mut r).map_err(|e| e.to_string())?;
    let xs = feats(&mut r, 6);
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
    let mut gp = vec![0.0; policy.num_params()];
    let mut gv = vec![0.0; value.num_params()];
    ppo_loss(&policy, &value, &samples, &p, 1.0, Some((&mut gp, &mut gv)));
    errors.push(("policy", fd_error(&policy.params, &gp, &mut r, |q| {
        ppo_loss(&Mlp::from_params(policy.sizes(), q.to_vec()).unwrap(), &value, &samples, &p, 1.0, None).loss
    })));
    errors.push(("value", fd_error(&value.params, &gv, &mut r, |q| {
        ppo_loss(&policy, &Mlp::from_params(value.sizes(), q.to_vec()).unwrap(), &samples, &p, 1.0, None).loss
    })));

    let disc = Mlp::<f64>::random(&[OBS + ACTION_DIM, 8, 1], 1.0, &mut r).map_err(|e| e.to_string())?;
    let demo: Vec<Vec<f64>> = feats(&mut r, 5).iter().map(|x| disc_input(x, &act(&mut r))).collect();
    let pol: Vec<Vec<f64>> = feats(&mut r, 5).iter().map(|x| disc_input(x, &act(&mut r))).collect();
    let dr: Vec<&[f64]> = demo.iter().map(Vec::as_slice).collect();
    let pr: Vec<&[f64]> = pol.iter().map(Vec::as_slice).collect();
    let mut gd = vec![0.0; disc.num_params()];
    gail_loss(&disc, &dr, &pr, 1.0, Some(&mut gd));
    errors.push(("discriminator", fd_error(&disc.params, &gd, &mut r, |q| {
        gail_loss(&Mlp::from_params(disc.sizes(), q.to_vec()).unwrap(), &dr, &pr, 1.0, None)
    })));

    let nets = CuriosityNets::new(OBS, 4, 8, &mut r).map_err(|e| e.to_string())?;
    let cx = feats(&mut r, 10);
    let batch: Vec<CuriositySample<'_>> = (0..5).map(|k| CuriositySample { obs: &cx[2 * k], next: &cx[2 * k + 1], action: act(&mut r) }).collect();
    let wi = 0.8;
    let mut ge = vec![0.0; nets.encoder.num_params()];
    let mut gf = vec![0.0; nets.forward.num_params()];
    let mut gi = vec![0.0; nets.inverse.num_params()];
    curiosity_loss(&nets, &batch, wi, 1.0, Some(CuriosityGrads { encoder: &mut ge, forward: &mut gf, inverse: &mut gi }));
    let with = |f: &dyn Fn(&mut CuriosityNets)| {
        let mut n = nets.clone();
        f(&mut n);
        n
    };
    errors.push(("curiosity forward", fd_error(&nets.forward.params, &gf, &mut r, |q| {
        curiosity_loss(&with(&|n| n.forward.params = q.to_vec()), &batch, wi, 1.0, None).loss
    })));
    errors.push(("curiosity inverse", fd_error(&nets.inverse.params, &gi, &mut r, |q| {
        curiosity_loss(&with(&|n| n.inverse.params = q.to_vec()), &batch, wi, 1.0, None).loss
    })));
    errors.push(("curiosity encoder", fd_error(&nets.encoder.params, &ge, &mut r, |q| {
        wi * curiosity_loss(&with(&|n| n.encoder.params = q.to_vec()), &batch, wi, 1.0, None).inverse
    })));

    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(worst < 1e-4, format!("max relative error {worst:.1e} ({detail})"))
}

fn pbd() -> Outcome {
    let mesh = TubeBuilder::new(10.0).segments(24).spacing(2.0).straight(40.0).build::<f64>();
    let tube = || SoftBodyWorld::from_mesh(&mesh, SoftBodyConfig::default(), HeartbeatDriver::off()).unwrap();
    let mut w = tube();
    for _ in 0..1000 {
        w.step(0.1).map_err(|e| e.to_string())?;
    }
    let drift = w.particles.iter().map(|p| p.position.distance(p.rest_position)).fold(0.0, f64::max);

    let mut rng = SimRng::seed_from_u64(4);
    let mut residual = 0.0f64;
    for _ in 0..20 {
        let particles: Vec<Particle<f64>> = (0..10)
            .map(|i| {
                let mut p = Particle::at_rest(Vec3::new(i as f64, 0.0, 0.0), 1.0);
                p.position += Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
                p.prev_position = p.position;
                p
            })
            .collect();
        let constraints = (0..9).map(|i| DistanceConstraint { i, j: i + 1, rest_length: 1.0, stiffness: 1.0 }).collect();
        let config = SoftBodyConfig { solver_iterations: 20, anchor_stiffness: 0.0, stiffness: 1.0, ..Default::default() };
        let mut c = SoftBodyWorld::new(particles, constraints, vec![], HeartbeatDriver::off(), config).map_err(|e| e.to_string())?;
        c.step(0.1).map_err(|e| e.to_string())?;
        residual = residual.max(c.max_residual());
    }

    let run = || {
        let mut w = tube();
        w.heartbeat = HeartbeatDriver::with_falloff(Vec3::new(0.0, 0.0, 1.5), 1.0, &w.positions().to_vec(), Vec3::new(0.0, 20.0, 0.0), 30.0);
        for k in 0..50 {
            w.step(0.1).unwrap();
            w.apply_tip_contact(Vec3::new(6.0 + 0.05 * k as f64, 20.0, 0.0), 3.5);
        }
        w.positions().iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect::<Vec<u64>>()
    };
    let bitwise = run() == run();
    check(
        drift <= 1e-6 && residual < 0.01 && bitwise,
        format!("rest drift {drift:.1e} mm, chain residual {:.3}%, bitwise repeat {bitwise}", 100.0 * residual),
    )
}

fn metric_oracles() -> Outcome {
    let e = |e: cathnav::Error| e.to_string();
    let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).map_err(e)?;
    let path: Vec<Vec3<f64>> = (0..200).map(|k| Vec3::new(0.0, k as f64 * 0.5, 0.0)).collect();
    let tracking = tracking_error(&path, &path).map_err(e)?.into_iter().fold(0.0, f64::max);
    let circle: Vec<Vec3<f64>> = (0..60).map(|k| {
        let t = k as f64 * 0.1;
        Vec3::new(10.0 * t.cos(), 10.0 * t.sin(), 0.0)
    }).collect();
    let kappa = curvature(&circle).map_err(e)?.into_iter().map(|c| (c - 0.1).abs()).fold(0.0, f64::max);
    let rate = success_rate(42, 100).map_err(e)?;
    check(
        (kw.h - 3.857).abs() < 1e-3 && (kw.p_value - 0.0495).abs() < 1e-3 && tracking == 0.0 && kappa < 1e-6 && rate == 0.42,
        format!("H {:.4}, p {:.4}, tracking {tracking}, curvature error {kappa:.1e}, success_rate {rate}", kw.h, kw.p_value),
    )
}

fn write_config(dir: &Path, name: &str, seed: u64, extra: &str, max_steps: usize) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let text = format!("seed = {seed}\nmax_steps = {max_steps}\nbuffer_size = 2048\nbatch_size = 128\nlearning_rate = 1e-3\n{extra}");
    std::fs::write(&path, text).unwrap();
    path
}

fn train(dir: &Path, demos: &Path, config: PathBuf, out: &str) -> cathnav::Result<PathBuf> {
    let args = TrainArgs {
        scenario: "toy-curved".into(),
        config: Some(config),
        demos: demos.to_path_buf(),
        out: dir.join(out),
        seed: None,
        max_steps: None,
        init_from: None,
        resume: None,
        dynamic: false,
        checkpoint_every: 10,
        quiet: true,
    };
    cmd_train(&args).map(|s| s.checkpoint)
}

fn evaluate(checkpoint: &Path, dynamic: bool) -> cathnav::Result<EvaluationReport> {
    cmd_evaluate(&EvaluateArgs {
        checkpoint: checkpoint.to_path_buf(),
        scenario: "toy-curved".into(),
        episodes: EPISODES,
        seed: EVAL_SEED,
        dynamic,
        stochastic: false,
        out: None,
    })
}

struct Runs {
    /// Static greedy success rate per seed, one entry per variant.
    success: Vec<[f64; 4]>,
    dynamic: Vec<f64>,
    logs: Vec<PathBuf>,
}

fn train_all(dir: &Path, demos: &Path) -> cathnav::Result<Runs> {
    let mut runs = Runs { success: Vec::new(), dynamic: Vec::new(), logs: Vec::new() };
    for seed in SEEDS {
        let mut row = [0.0; 4];
        for (k, (name, extra)) in VARIANTS.iter().enumerate() {
            let started = Instant::now();
            let out = format!("{name}_{seed}");
            let ck = train(dir, demos, write_config(dir, &out, seed, extra, 100_000), &out)?;
            runs.logs.push(dir.join(&out).join(LOG_FILE));
            let report = evaluate(&ck, false)?;
            row[k] = report.metrics.delta;
            if k == 0 {
                runs.dynamic.push(evaluate(&ck, true)?.metrics.delta);
            }
            eprintln!("  seed {seed} {name}: success {:.2} ({:.0} s)", row[k], started.elapsed().as_secs_f64());
        }
        runs.success.push(row);
    }
    Ok(runs)
}

fn ablation(runs: &Runs) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (k, (name, _)) in VARIANTS.iter().enumerate().skip(1) {
        let wins = runs.success.iter().filter(|r| r[0] >= r[k]).count();
        ok &= wins >= 3;
        detail.push(format!("full >= {name} on {wins}/5"));
    }
    let mean = |k: usize| runs.success.iter().map(|r| r[k]).sum::<f64>() / runs.success.len() as f64;
    let means = VARIANTS.iter().enumerate().map(|(k, (n, _))| format!("{n} {:.2}", mean(k))).collect::<Vec<_>>().join(", ");
    check(ok, format!("{}; mean success {means}", detail.join(", ")))
}

fn static_vs_dynamic(runs: &Runs) -> Outcome {
    let pairs: Vec<(f64, f64)> = runs.success.iter().map(|r| r[0]).zip(runs.dynamic.iter().copied()).collect();
    let ok = pairs.iter().all(|(s, d)| d <= s);
    let detail = pairs.iter().map(|(s, d)| format!("{s:.2}->{d:.2}")).collect::<Vec<_>>().join(", ");
    check(ok, format!("static->dynamic success per seed {detail}"))
}

fn curriculum(logs: &[PathBuf]) -> Outcome {
    let final_theta = CatheterSpec::<f64>::default().theta_max;
    let mut rows = 0;
    for path in logs {
        let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
        let log = read_log(file).map_err(|e| e.to_string())?;
        rows += log.len();
        if log.windows(2).any(|w| w[1].theta_max_current > w[0].theta_max_current) {
            return Err(format!("{} increases", path.display()));
        }
        if log.iter().any(|r| r.theta_max_current < final_theta) {
            return Err(format!("{} falls below the final limit", path.display()));
        }
    }
    check(rows > 0, format!("{} logs, {rows} rows, non-increasing and >= {final_theta:.4} rad", logs.len()))
}

fn determinism(dir: &Path, demos: &Path) -> Outcome {
    let e = |e: cathnav::Error| e.to_string();
    let mut outputs = Vec::new();
    for run in ["repeat_a", "repeat_b"] {
        let ck = train(dir, demos, write_config(dir, run, 7, "", 8192), run).map_err(e)?;
        let log = std::fs::read(dir.join(run).join(LOG_FILE)).map_err(|e| e.to_string())?;
        let checkpoint = std::fs::read(&ck).map_err(|e| e.to_string())?;
        let report = evaluate(&ck, false).map_err(e)?.to_json();
        outputs.push((log, checkpoint, report));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    check(
        a.0 == b.0 && a.1 == b.1 && a.2 == b.2,
        format!("log identical {}, checkpoint identical {}, report identical {}", a.0 == b.0, a.1 == b.1, a.2 == b.2),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("reward arithmetic", reward_arithmetic()),
        ("bend bound", bend_bound()),
        ("total loss linearity", loss_linearity()),
        ("gradient correctness", gradients()),
        ("PBD soundness", pbd()),
        ("metrics oracles", metric_oracles()),
    ];

    let dir = tempfile::tempdir().expect("temp dir");
    let demos = dir.path().join("demos");
    let recorded = cmd_demos(&DemosArgs {
        scenario: "toy-curved".into(),
        count: 30,
        noise: 0.5,
        seed: 1000,
        recorder: "scripted".into(),
        date: None,
        out: demos.clone(),
    });
    eprintln!("training {} seeds x {} variants", SEEDS.len(), VARIANTS.len());
    match recorded.and_then(|_| train_all(dir.path(), &demos)) {
        Ok(runs) => {
            results.push(("toy ablation ordering", ablation(&runs)));
            results.push(("static vs dynamic", static_vs_dynamic(&runs)));
            results.push(("curriculum invariant", curriculum(&runs.logs)));
        }
        Err(e) => {
            for name in ["toy ablation ordering", "static vs dynamic", "curriculum invariant"] {
                results.push((name, Err(format!("training failed: {e}"))));
            }
        }
    }
    results.push(("determinism", determinism(dir.path(), &demos)));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}")
            }
        }
    }
    println!("{} of {} criteria passed in {:.0} s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
