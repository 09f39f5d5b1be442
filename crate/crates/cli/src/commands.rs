//! Subcommand implementations. Each returns a summary value so that tests
//! can drive the commands without spawning the binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cathnav::demonstrations::{demo_files, meta_for, record, replay, Demonstration, Replay, ScriptedExpert};
use cathnav::environment::path::PlannedPath;
use cathnav::environment::{run_episode, toy, Environment, Scenario, SimRng};
use cathnav::learner::log::{read_log, save_log};
use cathnav::learner::{evaluate, Checkpoint, IterationLog, TrainConfig, Trainer};
use cathnav::metrics::{resample_path, MetricsReport, DEFAULT_SAMPLES};
use cathnav::{Error, Result};
use rand::SeedableRng;
use serde::Serialize;

use crate::args::*;
use crate::report::{compare, Comparison, EvaluationReport, REPORT_FORMAT, REPORT_VERSION};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// A scenario file path or a built-in name.
pub fn load_scenario(name: &str) -> Result<Arc<Scenario>> {
    match name {
        "toy-curved" => Ok(toy::curved()),
        "toy-straight" => Ok(toy::straight()),
        path => Scenario::load(path),
    }
}

fn with_dynamics(sc: Arc<Scenario>, dynamic: bool) -> Result<Arc<Scenario>> {
    if dynamic {
        Ok(Arc::new(sc.with_dynamics(true, true)?))
    } else {
        Ok(sc)
    }
}

/// Checks that `ck` was trained on `base` (static or dynamic variant).
fn check_compatible(ck: &Checkpoint, base: &Scenario) -> Result<()> {
    let dynamic = base.with_dynamics(true, true)?;
    let stat = base.with_dynamics(false, false)?;
    if ![base.hash.as_str(), dynamic.hash.as_str(), stat.hash.as_str()].contains(&ck.scenario_hash.as_str()) {
        return Err(Error::Schema(format!("checkpoint was trained on scenario {} ({}), not {}", ck.scenario, ck.scenario_hash, base.name())));
    }
    if ck.schema_hash != base.schema_hash() {
        return Err(Error::Schema("checkpoint observation schema differs from the scenario".into()));
    }
    Ok(())
}

pub fn load_demos(dir: &Path, schema_hash: &str) -> Result<Vec<Demonstration>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("demonstration directory {} not found", dir.display())));
    }
    let files = demo_files(dir)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no *.jsonl demonstrations in {}", dir.display())));
    }
    files.iter().map(|f| Demonstration::load_checked(f, schema_hash)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub env_steps: usize,
    pub config_hash: String,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub final_success_rate: f64,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let sc = with_dynamics(load_scenario(&args.scenario)?, args.dynamic)?;
    let demos = load_demos(&args.demos, &sc.schema_hash())?;
    std::fs::create_dir_all(&args.out)?;
    let ck_path = args.out.join(CHECKPOINT_FILE);
    let log_path = args.out.join(LOG_FILE);

    let overrides = |mut cfg: TrainConfig| {
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(m) = args.max_steps {
            cfg.max_steps = m;
        }
        cfg
    };
    let (mut trainer, mut rows) = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if let Some(c) = &args.config {
                let cfg = overrides(TrainConfig::load(c)?);
                if cfg.hash() != ck.config_hash {
                    return Err(Error::Schema(format!("{} does not match the checkpoint's configuration", c.display())));
                }
            }
            let t = Trainer::resume(sc.clone(), &demos, &ck)?;
            let rows: Vec<IterationLog> = match std::fs::File::open(&log_path) {
                Ok(f) => read_log(f)?.into_iter().filter(|r| r.iteration <= ck.iteration).collect(),
                Err(_) => Vec::new(),
            };
            (t, rows)
        }
        None => {
            let cfg = overrides(match &args.config {
                Some(c) => TrainConfig::load(c)?,
                None => TrainConfig::default(),
            });
            cfg.validate()?;
            let mut t = Trainer::new(sc.clone(), &demos, cfg)?;
            if let Some(init) = &args.init_from {
                t.load_weights(&Checkpoint::load(init)?)?;
            }
            (t, Vec::new())
        }
    };
    std::fs::write(args.out.join(CONFIG_FILE), trainer.config.to_toml())?;

    let every = args.checkpoint_every.max(1);
    while !trainer.is_finished() {
        match trainer.iterate() {
            Ok(row) => {
                if !args.quiet {
                    eprintln!(
                        "iter {:>4} steps {:>8} reward {:>8.3} success {:.2} L_PPO {:.4} L_GAIL {:.4} L_BC {:.4} L_cur {:.4} theta {:.3}",
                        row.iteration, row.env_steps, row.mean_reward, row.success_rate, row.l_ppo, row.l_gail, row.l_bc, row.l_curiosity, row.theta_max_current
                    );
                }
                rows.push(row);
                save_log(&log_path, &rows)?;
                if row.iteration % every == 0 {
                    trainer.checkpoint().save(&ck_path)?;
                }
            }
            Err(e @ Error::TrainingDiverged(_)) => {
                // the trainer rolled back to its last finite state
                trainer.checkpoint().save(&ck_path)?;
                save_log(&log_path, &rows)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        }
    }
    trainer.checkpoint().save(&ck_path)?;
    save_log(&log_path, &rows)?;
    Ok(TrainSummary {
        iterations: trainer.iteration,
        env_steps: trainer.env_steps,
        config_hash: trainer.config.hash(),
        checkpoint: ck_path,
        log: log_path,
        final_success_rate: rows.last().map_or(0.0, |r| r.success_rate),
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    if args.episodes == 0 {
        return Err(Error::Domain("evaluation needs at least one episode".into()));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let base = load_scenario(&args.scenario)?;
    check_compatible(&ck, &base)?;
    let sc = Arc::new(base.with_dynamics(args.dynamic, args.dynamic)?);
    let mut policy = cathnav::learner::LearnedPolicy { net: ck.policy.clone(), scale: ck.scale, deterministic: !args.stochastic };
    let results = evaluate(sc.clone(), &mut policy, args.episodes, args.seed)?;
    let desired = resample_path(&sc.spaces.centerline, DEFAULT_SAMPLES)?;
    let report = EvaluationReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        scenario: base.name().into(),
        scenario_hash: base.hash.clone(),
        config_hash: ck.config_hash.clone(),
        checkpoint_iteration: ck.iteration,
        checkpoint_env_steps: ck.env_steps,
        dynamic: args.dynamic,
        stochastic: args.stochastic,
        seed: args.seed,
        epsilon: sc.file.reward.epsilon,
        metrics: MetricsReport::from_episodes(&results, &desired)?,
    };
    if let Some(out) = &args.out {
        report.save(out)?;
    }
    Ok(report)
}

pub fn cmd_plan(args: &PlanArgs) -> Result<PlannedPath> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let base = load_scenario(&args.scenario)?;
    check_compatible(&ck, &base)?;
    let sc = Arc::new(base.with_dynamics(args.dynamic, args.dynamic)?);
    let mut env = Environment::new(sc.clone());
    let mut rng = SimRng::seed_from_u64(args.seed);
    let mut policy = cathnav::learner::LearnedPolicy { net: ck.policy.clone(), scale: ck.scale, deterministic: true };
    let ep = run_episode(&mut env, &mut policy, &mut rng)?;
    let path = PlannedPath::from_poses(sc.name(), &ck.config_hash, ep.success, ep.target, &ep.poses);
    path.save(&args.out)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemosSummary {
    pub files: Vec<PathBuf>,
    pub successes: usize,
    pub steps: usize,
}

pub fn cmd_demos(args: &DemosArgs) -> Result<DemosSummary> {
    if !(args.noise >= 0.0) {
        return Err(Error::Config("noise must be non-negative".into()));
    }
    let sc = load_scenario(&args.scenario)?;
    std::fs::create_dir_all(&args.out)?;
    let mut env = Environment::new(sc.clone());
    let mut expert = ScriptedExpert::new(sc.spaces.centerline.clone(), sc.file.catheter, args.noise);
    let rays = sc.file.rays.count();
    let mut summary = DemosSummary { files: Vec::new(), successes: 0, steps: 0 };
    for i in 0..args.count {
        let mut rng = SimRng::seed_from_u64(args.seed + i as u64);
        let meta = meta_for(&env, &args.recorder, args.date.clone());
        let demo = record(&mut env, &mut expert, &mut rng, meta)?;
        let path = args.out.join(format!("demo_{i:03}.jsonl"));
        demo.save(&path, rays)?;
        summary.successes += demo.outcome as usize;
        summary.steps += demo.steps.len();
        summary.files.push(path);
    }
    Ok(summary)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<Replay> {
    let sc = load_scenario(&args.scenario)?;
    let demo = Demonstration::load_checked(&args.demo, &sc.schema_hash())?;
    let mut env = Environment::new(sc);
    let r = replay(&mut env, &demo)?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&r).expect("replay serializes"))?;
    }
    Ok(r)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Comparison> {
    let c = compare(&EvaluationReport::load(&args.a)?, &EvaluationReport::load(&args.b)?)?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&c).expect("comparison serializes"))?;
    }
    Ok(c)
}

pub fn cmd_plot(args: &PlotArgs) -> Result<Vec<PathBuf>> {
    match &args.target {
        PlotTarget::Log { log, out } => crate::plot::plot_log(&read_log(std::fs::File::open(log)?)?, out),
        PlotTarget::Report { report, out } => crate::plot::plot_report(&EvaluationReport::load(report)?, out),
        PlotTarget::Path { path, scenario, out } => {
            let sc = load_scenario(scenario)?;
            crate::plot::plot_path(&PlannedPath::load(path)?, &sc.spaces.centerline, out)
        }
    }
}

pub fn cmd_gen_mesh(args: &GenMeshArgs) -> Result<PathBuf> {
    let (name, tube) = match args.kind {
        ToyKind::Curved => ("toy-curved", toy::curved_tube()),
        ToyKind::Straight => ("toy-straight", toy::straight_tube()),
    };
    std::fs::create_dir_all(&args.out)?;
    let mesh_file = format!("{name}.obj");
    tube.build::<f64>().save_obj(args.out.join(&mesh_file))?;
    let toml_path = args.out.join(format!("{name}.toml"));
    std::fs::write(&toml_path, toy::scenario_file(name, &tube, &mesh_file).to_toml())?;
    Ok(toml_path)
}
