use evoreward::dsl::{parse_program, RewardProgram};
use evoreward::fitness::compute_fitness;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::labeler::{sets_from_labels, Labeler};
use evoreward::mutation::{
    build_context, init_program_rule_based, mutate_rule_based, shaping_edit, FeedbackConfig, FeedbackState,
    MutationContext, MutationMode, Mutator,
};
use evoreward::trajectory::{Trajectory, TrajectoryDataset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(task: &str, experts: u64, randoms: u64) -> (TrajectoryDataset, TrajectoryDataset) {
    let env = Env::new(EnvConfig::new(task, 6)).unwrap();
    let mut dplus: TrajectoryDataset = (0..experts).map(|s| env.expert_rollout(s).unwrap()).collect();
    let mut dminus: TrajectoryDataset = (0..randoms)
        .map(|s| env.random_rollout(500 + s))
        .filter(|t: &Trajectory| !env.success(t.final_state()))
        .collect();
    Labeler::Oracle.label_dataset(&mut dplus).unwrap();
    Labeler::Oracle.label_dataset(&mut dminus).unwrap();
    (dplus, dminus)
}

fn context(parent: &RewardProgram, feedback: Vec<FeedbackState>, seed: u64) -> MutationContext {
    MutationContext {
        parent: parent.clone(),
        feedback_states: feedback,
        paired_expert_state: None,
        expert_trajectory: None,
        expert_trajectories: vec![],
        failed_trajectories: vec![],
        mode: MutationMode::ClassifyFix,
        rng_seed: seed,
    }
}

#[test]
fn missed_open_door_can_be_repaired() {
    let (dplus, _) = data("OpenDoorColor", 12, 0);
    let red = dplus
        .trajectories
        .iter()
        .map(|t| t.final_state())
        .find(|s| s.instruction.contains("red"))
        .expect("a red-door episode")
        .clone();
    let parent = parse_program(
        r#"fn reward(s, instr) {
    if carrying(s) == "key" { return 100.0 }
    return 0.1
}"#,
    )
    .unwrap();
    assert!(parent.evaluate(&red).reward() < 50.0);
    let fb = vec![FeedbackState {
        state: red.clone(),
        value: 0.1,
        debug_trace: vec![],
        is_goal: true,
    }];
    let repaired = (0..40).any(|seed| {
        let child = Mutator::RuleBased.mutate(&context(&parent, fb.clone(), seed), &[]).unwrap();
        child.evaluate(&red).reward() == 100.0
    });
    assert!(repaired);
}

#[test]
fn gates_shape_the_context() {
    let (dplus, dminus) = data("GoToObj", 6, 6);
    let sets = sets_from_labels(&dplus, &dminus);
    // true on every agent column below 3: both kinds of mistakes
    let p = parse_program("fn reward(s, instr) { if agent_pos(s).x < 3.0 { return 100.0 } return 0.0 }").unwrap();
    let report = compute_fitness(&p, &sets, 50.0).unwrap();
    assert!(!report.false_negatives.is_empty() && !report.false_positives.is_empty());

    let always = FeedbackConfig {
        p_expert_trajectory: 1.0,
        p_incorrect_only: 1.0,
        p_expert_only: 1.0,
        max_feedback_states: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ctx = build_context(&p, &report, &sets, &dplus, &always, &mut rng).unwrap();
    assert!(ctx.expert_trajectory.is_some());
    assert!(ctx.feedback_states.iter().all(|f| f.is_goal));
    assert!(ctx.feedback_states.len() <= 3);

    let never = FeedbackConfig {
        p_expert_trajectory: 0.0,
        p_incorrect_only: 0.0,
        p_expert_only: 0.0,
        max_feedback_states: 50,
    };
    let ctx = build_context(&p, &report, &sets, &dplus, &never, &mut rng).unwrap();
    assert!(ctx.expert_trajectory.is_none());
    assert!(ctx.paired_expert_state.is_some());
    assert_eq!(
        ctx.feedback_states.len(),
        report.false_negatives.len() + report.false_positives.len()
    );

    let only_incorrect = FeedbackConfig {
        p_incorrect_only: 1.0,
        ..never.clone()
    };
    let fn_only = parse_program("fn reward(s, instr) { return 0.0 }").unwrap();
    let r = compute_fitness(&fn_only, &sets, 50.0).unwrap();
    let ctx = build_context(&fn_only, &r, &sets, &dplus, &only_incorrect, &mut rng).unwrap();
    assert!(ctx.paired_expert_state.is_none());
    // false alarms always come with a goal state to contrast against
    let fp_only = parse_program("fn reward(s, instr) { return 100.0 }").unwrap();
    let r = compute_fitness(&fp_only, &sets, 50.0).unwrap();
    let ctx = build_context(&fp_only, &r, &sets, &dplus, &only_incorrect, &mut rng).unwrap();
    assert!(ctx.paired_expert_state.is_some());
}

#[test]
fn perfect_program_has_nothing_to_fix() {
    let (dplus, dminus) = data("GoToObj", 3, 3);
    let sets = sets_from_labels(&dplus, &dminus);
    let p = parse_program(
        r#"fn reward(s, instr) {
    for p in find_all(s, instr_object(instr, 0), instr_color(instr, 0)) {
        if p == front_pos(s) { return 100.0 }
    }
    return 0.1
}"#,
    )
    .unwrap();
    let r = compute_fitness(&p, &sets, 50.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(build_context(&p, &r, &sets, &dplus, &FeedbackConfig::default(), &mut rng).is_err());
}

#[test]
fn shaping_keeps_classification_and_adds_progress() {
    let (dplus, dminus) = data("OpenDoorColor", 4, 4);
    let p = parse_program(
        r#"fn reward(s, instr) {
    if door_open(s, instr_color(instr, 0)) { return 100.0 }
    return 0.1
}

fn door_open(s, color) {
    for p in find_all(s, "door", color) {
        if is_open(s, p) { return true }
    }
    return false
}"#,
    )
    .unwrap();
    let shaped = RewardProgram::from_ast(shaping_edit(&p.program, &dplus.trajectories).unwrap(), 0).unwrap();
    assert!(shaping_edit(&shaped.program, &[]).is_none());
    let sets = sets_from_labels(&dplus, &dminus);
    let a = compute_fitness(&p, &sets, 50.0).unwrap();
    let b = compute_fitness(&shaped, &sets, 50.0).unwrap();
    assert_eq!(a.fitness, b.fitness);
    for s in sets.nongoal_states() {
        assert!(shaped.evaluate(s).reward() < 1.0);
    }
    // moving toward the door raises the shaped value somewhere along each demonstration
    for t in &dplus.trajectories {
        let v: Vec<f64> = t.states().map(|s| shaped.evaluate(s).reward()).collect();
        assert!(v[v.len() - 2] > v[0] || v.len() < 3, "{v:?}");
    }
}

#[test]
fn shaping_stages_follow_the_demonstrations() {
    let (dplus, _) = data("OpenTwoDoors", 4, 1);
    let p = parse_program(
        r#"fn reward(s, instr) {
    if door_open(s, instr_color(instr, 1)) && door_open(s, instr_color(instr, 0)) { return 100.0 }
    return 0.0
}

fn door_open(s, color) {
    for p in find_all(s, "door", color) {
        if is_open(s, p) { return true }
    }
    return false
}"#,
    )
    .unwrap();
    let stage_order = |experts: &[evoreward::trajectory::Trajectory]| {
        let shaped = RewardProgram::from_ast(shaping_edit(&p.program, experts).unwrap(), 0).unwrap();
        let first = shaped.source.find("if !door_open(s, instr_color(instr, 0").unwrap();
        let second = shaped.source.find("if !door_open(s, instr_color(instr, 1").unwrap();
        first < second
    };
    assert!(stage_order(&dplus.trajectories));
    // without demonstrations the written order is kept
    assert!(!stage_order(&[]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn offspring_always_parse(seed in 0u64..10_000, task in 0usize..4) {
        let task = ["GoToObj", "OpenDoorColor", "PickupDist", "PlaceBetween"][task];
        let (dplus, dminus) = data(task, 3, 3);
        let sets = sets_from_labels(&dplus, &dminus);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let donor = init_program_rule_based(&sets, &mut rng);
        let parent = init_program_rule_based(&sets, &mut rng);
        prop_assert!(parse_program(&parent.source).is_ok());
        let Ok(report) = compute_fitness(&parent, &sets, 50.0) else { return Ok(()) };
        let Ok(ctx) = build_context(&parent, &report, &sets, &dplus, &FeedbackConfig::default(), &mut rng) else {
            return Ok(());
        };
        let child = mutate_rule_based(&ctx, &[&donor], &mut rng);
        let reparsed = parse_program(&child.source).unwrap();
        prop_assert_eq!(reparsed.source, child.source);
    }
}
