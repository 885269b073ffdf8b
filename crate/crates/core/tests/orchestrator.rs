use std::collections::HashSet;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evoreward::dsl::parse_program;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::mutation::{apply_edit, Edit, MutationContext, MutationMode};
use evoreward::orchestrator::reuse::thirds;
use evoreward::orchestrator::{
    analyze_reuse, eval_reward, load_history, run_loop, validate_metrics, Event, EventKind, LoopConfig, MetricsRow,
    ReuseRecord, METRICS_HEADER,
};
use evoreward::trajectory::{save_dataset, Trajectory, TrajectoryDataset};

fn row(generation: usize, max: f64) -> MetricsRow {
    MetricsRow {
        generation,
        max_train_fitness: max,
        mean_train_fitness: max / 2.0,
        test_fitness_best: max,
        mutations_attempted: 20,
        mutations_accepted: 3,
        new_helpers: 0,
        reused_helpers: 0,
        rl_success: None,
        env_steps: 0,
    }
}

fn expand(generation: usize) -> Event {
    Event {
        generation,
        kind: EventKind::Expand,
        detail: String::new(),
    }
}

#[test]
fn validator_accepts_rising_and_flat_columns() {
    let rows = vec![row(1, 0.2), row(2, 0.2), row(3, 0.9), row(4, 1.0)];
    assert_eq!(validate_metrics(&rows, &[]), Ok(()));
}

#[test]
fn validator_rejects_unexplained_drops() {
    let rows = vec![row(1, 0.5), row(2, 0.4)];
    assert!(validate_metrics(&rows, &[]).unwrap_err().contains("max_train_fitness fell"));
    // a drop is fine right after new data arrived, but not one generation later
    assert_eq!(validate_metrics(&rows, &[expand(1)]), Ok(()));
    let rows = vec![row(1, 0.5), row(2, 0.5), row(3, 0.4)];
    assert!(validate_metrics(&rows, &[expand(1)]).is_err());
}

#[test]
fn validator_rejects_malformed_rows() {
    assert!(validate_metrics(&[row(2, 0.1)], &[]).is_err());
    assert!(validate_metrics(&[row(1, 1.5)], &[]).is_err());
    let mut r = row(1, 0.3);
    r.mean_train_fitness = 0.4;
    assert!(validate_metrics(&[r], &[]).is_err());
    let mut r = row(1, 0.3);
    r.rl_success = Some(1.2);
    assert!(validate_metrics(&[r], &[]).is_err());
    let mut r = row(2, 0.3);
    r.env_steps = 0;
    let mut first = row(1, 0.3);
    first.env_steps = 10;
    assert!(validate_metrics(&[first, r], &[]).is_err());
}

const TWO_HELPERS: &str = r#"fn reward(s, instr) {
    if near(s) && facing(s) { return 100.0 }
    return 0.0
}
fn near(s) { return manhattan(agent_pos(s), pos(1, 1)) <= 2 }
fn facing(s) { return object_at(s, front_pos(s)) == "ball" }"#;

#[test]
fn single_program_with_two_helpers() {
    let p = parse_program(TWO_HELPERS).unwrap();
    let report = analyze_reuse(&[(1, vec![p])]);
    assert_eq!(
        report.per_generation,
        vec![ReuseRecord {
            generation: 1,
            new_helpers: 2,
            reused_helpers: 0
        }]
    );
    assert_eq!(report.programs_per_helper.values().copied().collect::<Vec<_>>(), vec![1, 1]);
    assert_eq!(report.calls_per_helper.values().sum::<usize>(), 2);
}

#[test]
fn edited_helper_body_is_new() {
    let a = parse_program(TWO_HELPERS).unwrap();
    let b = parse_program(&TWO_HELPERS.replace("<= 2", "<= 3")).unwrap();
    let report = analyze_reuse(&[(1, vec![a]), (2, vec![b])]);
    assert_eq!(report.per_generation[1].new_helpers, 1);
    assert_eq!(report.per_generation[1].reused_helpers, 1);
}

#[test]
fn grafted_helper_counts_as_reused() {
    let parent = parse_program(
        r#"fn reward(s, instr) {
    if ahead(s) { return 100.0 }
    return 0.0
}
fn ahead(s) { return object_at(s, front_pos(s)) == "key" }"#,
    )
    .unwrap();
    let donor = parse_program(TWO_HELPERS).unwrap();
    let ctx = MutationContext {
        parent: parent.clone(),
        feedback_states: vec![],
        paired_expert_state: None,
        expert_trajectory: None,
        expert_trajectories: vec![],
        failed_trajectories: vec![],
        mode: MutationMode::ClassifyFix,
        rng_seed: 0,
    };
    let child = (0..50)
        .find_map(|seed| apply_edit(Edit::Graft, &ctx, &[&donor], &mut ChaCha8Rng::seed_from_u64(seed)))
        .expect("graft applies");
    let donor_hashes: HashSet<&str> = donor.helper_hashes().collect();
    let grafted = child.helper_hashes().filter(|h| donor_hashes.contains(h)).count();
    assert!(grafted >= 1, "{}", child.source);

    let before = analyze_reuse(&[(1, vec![parent.clone(), donor.clone()]), (2, vec![parent.clone()])]);
    let after = analyze_reuse(&[(1, vec![parent, donor]), (2, vec![child])]);
    assert_eq!(after.per_generation[1].reused_helpers, before.per_generation[1].reused_helpers + grafted);
    assert_eq!(after.per_generation[1].new_helpers, 0);
}

#[test]
fn thirds_split_records() {
    let recs: Vec<ReuseRecord> = [5, 3, 2, 1, 0, 0]
        .iter()
        .enumerate()
        .map(|(g, &n)| ReuseRecord {
            generation: g,
            new_helpers: n,
            reused_helpers: 0,
        })
        .collect();
    assert_eq!(thirds(&recs), (8, 0));
}

fn search_only(task: &str, generations: usize) -> LoopConfig {
    let mut c = LoopConfig::default();
    c.data.task = task.into();
    c.search.generations = generations;
    c.rl.budget = 0;
    c
}

#[test]
fn zero_generations_writes_phase_one_only() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_loop(&search_only("GoToObj", 0), dir.path(), None, false).unwrap();
    assert!(m.rows.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.trim_end(), METRICS_HEADER);
    for f in ["data/train_plus.jsonl", "data/test_minus.jsonl", "accepted.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("best").read_dir().unwrap().any(|_| true));
}

#[test]
fn header_and_history_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_loop(&search_only("OpenTwoDoors", 3), dir.path(), None, false).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(METRICS_HEADER));
    assert_eq!(csv.lines().count(), m.rows.len() + 1);
    let history = load_history(dir.path()).unwrap();
    assert_eq!(history[0].0, 0);
    let accepted: usize = m.rows.iter().map(|r| r.mutations_accepted).sum();
    let stored: usize = history.iter().skip(1).map(|(_, ps)| ps.len()).sum();
    assert_eq!(stored, accepted);
    for r in &m.rows {
        let best = dir.path().join(format!("best/gen_{:04}.rwd", r.generation));
        parse_program(&std::fs::read_to_string(best).unwrap()).unwrap();
    }
}

#[test]
fn seeded_runs_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c = search_only("OpenTwoDoors", 4);
    c.rl.budget = 20_000;
    c.rl.trigger_fitness = 0.9;
    run_loop(&c, a.path(), None, false).unwrap();
    run_loop(&c, b.path(), None, false).unwrap();
    let read = |p: &Path| std::fs::read(p.join("metrics.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let (whole, split) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_loop(&search_only("OpenTwoDoors", 6), whole.path(), None, false).unwrap();
    run_loop(&search_only("OpenTwoDoors", 3), split.path(), None, false).unwrap();
    let m = run_loop(&search_only("OpenTwoDoors", 6), split.path(), None, true).unwrap();
    let read = |p: &Path, f: &str| std::fs::read_to_string(p.join(f)).unwrap();
    assert_eq!(read(whole.path(), "metrics.csv"), read(split.path(), "metrics.csv"));
    assert_eq!(read(whole.path(), "accepted.jsonl"), read(split.path(), "accepted.jsonl"));
    assert_eq!(m.rows.last().map(|r| r.generation), Some(m.rows.len()));
}

const GO_TO: &str =
    "fn reward(s, instr) { if object_at(s, front_pos(s)) == instr_object(instr, 0) { return 100.0 } return 0.0 }";

/// One demonstration plus a random-walk prefix, with exactly `nongoals`
/// distinct non-goal states overall.
fn dataset_with_nongoals(nongoals: usize) -> TrajectoryDataset {
    let env = Env::new(EnvConfig::new("GoToObj", 6)).unwrap();
    let expert = env.expert_rollout(0).unwrap();
    let goal = expert.final_state().key();
    let mut seen: HashSet<_> = expert.states().map(|s| s.key()).filter(|k| *k != goal).collect();
    assert!(seen.len() < nongoals);
    let mut walk = env.random_rollout(1);
    let mut keep = 0;
    for (i, s) in walk.steps.iter().enumerate() {
        if seen.len() == nongoals {
            break;
        }
        seen.insert(s.state.key());
        keep = i + 1;
    }
    assert_eq!(seen.len(), nongoals);
    walk.steps.truncate(keep);
    TrajectoryDataset::new(vec![expert, walk])
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn eval_reward_perfect_and_constant() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    save_dataset(&dataset_with_nongoals(20), &data).unwrap();
    let perfect = eval_reward(&write(dir.path(), "p.rwd", GO_TO), &data, None, 50.0).unwrap();
    assert_eq!(perfect.train.fitness, 1.0);
    let constant = eval_reward(&write(dir.path(), "c.rwd", "fn reward(s, instr) { return 0.0 }"), &data, None, 50.0).unwrap();
    assert_eq!(constant.train.fitness, 0.0);
}

#[test]
fn eval_reward_lists_the_single_false_positive() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset_with_nongoals(20);
    let data = dir.path().join("d.jsonl");
    save_dataset(&ds, &data).unwrap();
    let walk: &Trajectory = &ds.trajectories[1];
    let program = walk
        .states()
        .find_map(|s| {
            let (p, d) = (s.agent_pos(), s.agent_dir().code());
            let src = GO_TO.replace(
                "return 0.0 }",
                &format!(
                    "if agent_pos(s) == pos({}, {}) && agent_dir(s) == {d} {{ return 100.0 }} return 0.0 }}",
                    p.x, p.y
                ),
            );
            let path = write(dir.path(), "fp.rwd", &src);
            let r = eval_reward(&path, &data, Some(&data), 50.0).unwrap();
            (r.train.false_positives.len() == 1 && r.train.false_negatives.is_empty()).then_some(path)
        })
        .expect("some walk state is unique in position and heading");
    let r = eval_reward(&program, &data, None, 50.0).unwrap();
    assert_eq!(r.train.nongoal_count, 20);
    assert_eq!(r.train.fitness, 1.0 - 1.0 / 20.0);
    assert!((r.train.fitness - 0.95).abs() < 1e-12);

    let out = Command::new(env!("CARGO_BIN_EXE_evoreward"))
        .args(["eval-reward", "--program"])
        .arg(&program)
        .arg("--train")
        .arg(&data)
        .arg("--test")
        .arg(&data)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("fitness 0.9500"), "{stdout}");
    assert!(stdout.contains("false positives 1/20"), "{stdout}");

    let ok = Command::new(env!("CARGO_BIN_EXE_evoreward"))
        .args(["eval-reward", "--program"])
        .arg(write(dir.path(), "p.rwd", GO_TO))
        .arg("--train")
        .arg(&data)
        .arg("--test")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn eval_reward_reports_parse_position() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    save_dataset(&dataset_with_nongoals(20), &data).unwrap();
    let bad = write(dir.path(), "bad.rwd", "fn reward(s, instr) {\n  return (1 + \n}");
    let err = eval_reward(&bad, &data, None, 50.0).unwrap_err().to_string();
    assert!(err.contains("bad.rwd") && err.contains('3'), "{err}");
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", "[data]\ntask = \"OpenDoorColor\"\n[search]\nmutator = \"rule\"\ngenerations = 7\n");
    let c = LoopConfig::load(&good).unwrap();
    assert_eq!((c.data.task.as_str(), c.search.generations), ("OpenDoorColor", 7));
    let bad = write(dir.path(), "bad.toml", "[search]\ngenerationz = 7\n");
    assert!(LoopConfig::load(&bad).is_err());
}

