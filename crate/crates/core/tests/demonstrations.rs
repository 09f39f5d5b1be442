use cathnav::demonstrations::*;
use cathnav::environment::*;
use cathnav::kinematics::{max_bend_at_step, Action};
use cathnav::Error;
use proptest::prelude::*;
use rand::SeedableRng;

fn expert(sc: &Scenario, noise: f64) -> ScriptedExpert {
    ScriptedExpert::new(sc.spaces.centerline.clone(), sc.file.catheter, noise)
}

fn recorded(noise: f64, seed: u64) -> Demonstration {
    let sc = toy::curved();
    let mut env = Environment::new(sc.clone());
    let mut rng = SimRng::seed_from_u64(seed);
    let meta = meta_for(&env, "scripted", None);
    record(&mut env, &mut expert(&sc, noise), &mut rng, meta).unwrap()
}

fn to_text(d: &Demonstration) -> String {
    let mut buf = Vec::new();
    d.write(&mut buf, d.rays()).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn clean_expert_reaches_the_target_in_the_straight_tube() {
    let sc = toy::straight();
    let mut env = Environment::new(sc.clone());
    let mut rng = SimRng::seed_from_u64(0);
    let ep = run_episode(&mut env, &mut expert(&sc, 0.0), &mut rng).unwrap();
    assert!(ep.success);
    let demo = Demonstration::from_episode(meta_for(&env, "scripted", None), &ep);
    assert_eq!(demo.steps.len(), ep.steps());
    assert!(demo.outcome);
    for (s, t) in demo.steps.iter().zip(&ep.transitions) {
        assert_eq!(s.observation, t.observation);
        assert_eq!(s.action, t.action);
    }
}

#[test]
fn recordings_of_a_seeded_expert_are_identical() {
    assert_eq!(to_text(&recorded(0.3, 4)), to_text(&recorded(0.3, 4)));
}

#[test]
fn curved_demonstrations_are_feasible() {
    let sc = toy::curved();
    for seed in 0..5 {
        let d = recorded(0.5, seed);
        assert!(d.is_feasible(&sc.file.catheter));
        for s in &d.steps {
            let bound = max_bend_at_step(&sc.file.catheter, s.action.insertion).unwrap();
            assert!(s.action.alpha.abs() <= bound + 1e-12 && s.action.gamma.abs() <= bound + 1e-12);
        }
    }
    let mut d = recorded(0.0, 0);
    d.steps[0].action = Action::new(1.0, 0.0, 0.1);
    assert!(!d.is_feasible(&sc.file.catheter));
}

#[test]
fn noise_does_not_shorten_episodes_on_average() {
    let mean_steps = |noise| (0..20).map(|s| recorded(noise, 100 + s).steps.len() as f64).sum::<f64>() / 20.0;
    assert!(mean_steps(0.2) >= mean_steps(0.0));
}

#[test]
fn save_load_round_trip() {
    let d = recorded(0.3, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    d.save(&path, d.rays()).unwrap();
    assert_eq!(Demonstration::load(&path).unwrap(), d);
    let mut dated = d.clone();
    dated.meta.date = Some("2024-03-01".into());
    assert_eq!(Demonstration::parse(&to_text(&dated)).unwrap(), dated);
    assert!(matches!(Demonstration::load_checked(&path, "other"), Err(Error::Schema(_))));
    assert_eq!(Demonstration::load_checked(&path, &d.meta.schema_hash).unwrap(), d);
    assert_eq!(demo_files(dir.path()).unwrap(), vec![path]);
}

#[test]
fn truncated_file_reports_the_byte_offset() {
    let text = to_text(&recorded(0.0, 1));
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    // drop the trailer
    let head: String = lines[..lines.len() - 1].concat();
    match Demonstration::parse(&head) {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset, head.len()),
        other => panic!("{other:?}"),
    }
    // cut through the third step
    let cut = lines[0].len() + lines[1].len() + lines[2].len() / 2;
    match Demonstration::parse(&text[..cut]) {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset, lines[0].len() + lines[1].len()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn mismatched_ray_count_is_a_schema_error() {
    let d = recorded(0.0, 2);
    let text = to_text(&d);
    let rays = d.rays();
    let bad = text.replacen(&format!("\"rays\":{rays}"), &format!("\"rays\":{}", rays + 1), 1);
    assert!(matches!(Demonstration::parse(&bad), Err(Error::Schema(_))));
    let mut w = DemoWriter::new(Vec::new(), &d.meta, rays + 1).unwrap();
    assert!(matches!(w.push(&d.steps[0]), Err(Error::Schema(_))));
}

#[test]
fn aborted_session_is_partial_and_unsuccessful() {
    let d = recorded(0.0, 3);
    let mut w = DemoWriter::new(Vec::new(), &d.meta, d.rays()).unwrap();
    for s in &d.steps[..3] {
        w.push(s).unwrap();
    }
    let bytes = w.finish(false).unwrap();
    let back = Demonstration::parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(back.steps, d.steps[..3].to_vec());
    assert!(!back.outcome);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn round_trip_any_prefix(seed in 0u64..50, keep in 0usize..40, outcome in any::<bool>()) {
        let mut d = recorded(0.4, seed);
        d.steps.truncate(keep);
        d.outcome = outcome;
        let mut buf = Vec::new();
        d.write(&mut buf, toy::curved().file.rays.count()).unwrap();
        prop_assert_eq!(Demonstration::parse(std::str::from_utf8(&buf).unwrap()).unwrap(), d);
    }
}

#[test]
fn replay_reproduces_a_recording() {
    let sc = toy::curved();
    let d = recorded(0.3, 9);
    let mut env = Environment::new(sc.clone());
    let r = replay(&mut env, &d).unwrap();
    assert_eq!(r.steps, d.steps.len());
    assert_eq!(r.max_observation_error, 0.0);
    assert_eq!(r.outcome.is_some_and(|o| o == Outcome::Success), d.outcome);

    let mut partial = d.clone();
    partial.steps.truncate(3);
    assert_eq!(replay(&mut env, &partial).unwrap().outcome, None);
    let mut unseeded = d.clone();
    unseeded.meta.episode = None;
    assert!(matches!(replay(&mut env, &unseeded), Err(Error::Config(_))));
    let mut other = Environment::new(toy::straight());
    assert!(matches!(replay(&mut other, &d), Err(Error::Schema(_))));
}
