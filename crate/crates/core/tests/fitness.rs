use evoreward::dsl::parse_program;
use evoreward::fitness::{compute_fitness, masked_return_identity_check, masked_return_sides, FitnessError, DEFAULT_TAU};
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::labeler::{build_labeled_sets, label_oracle, sets_from_labels, stored_labels, LabelError, Labeler};
use evoreward::sets::LabeledStateSets;
use evoreward::state::GridState;
use evoreward::trajectory::{Trajectory, TrajectoryDataset};
use proptest::prelude::*;

const GO_TO: &str = r#"
fn reward(s, instr) {
    for p in find_all(s, instr_object(instr, 0), instr_color(instr, 0)) {
        if p == front_pos(s) { return 100.0 }
    }
    return 0.1
}
"#;

fn data(task: &str, experts: u64, randoms: u64) -> (TrajectoryDataset, TrajectoryDataset) {
    let env = Env::new(EnvConfig::new(task, 6)).unwrap();
    let mut dplus: TrajectoryDataset = (0..experts).map(|s| env.expert_rollout(s).unwrap()).collect();
    let mut dminus: TrajectoryDataset = (0..randoms)
        .map(|s| env.random_rollout(1000 + s))
        .filter(|t: &Trajectory| !env.success(t.final_state()))
        .collect();
    Labeler::Oracle.label_dataset(&mut dplus).unwrap();
    Labeler::Oracle.label_dataset(&mut dminus).unwrap();
    (dplus, dminus)
}

#[test]
fn perfect_and_constant_programs() {
    let (dplus, dminus) = data("GoToObj", 4, 4);
    let sets = sets_from_labels(&dplus, &dminus);
    let perfect = compute_fitness(&parse_program(GO_TO).unwrap(), &sets, DEFAULT_TAU).unwrap();
    assert_eq!(perfect.fitness, 1.0);
    assert!(perfect.is_perfect());
    let constant = compute_fitness(&parse_program("fn reward(s, instr) { return 100.0 }").unwrap(), &sets, 50.0).unwrap();
    assert_eq!(constant.fitness, 0.0);
    assert_eq!(constant.false_positives.len(), sets.nongoal_len());
    assert!(constant.false_negatives.is_empty());
}

#[test]
fn three_of_four_goals() {
    let (dplus, dminus) = data("GoToObj", 20, 10);
    let mut goals: Vec<GridState> = Vec::new();
    for t in &dplus.trajectories {
        let g = t.final_state();
        if goals.iter().all(|o| o.agent_pos() != g.agent_pos()) && goals.len() < 4 {
            goals.push(g.clone());
        }
    }
    assert_eq!(goals.len(), 4);
    let mut sets = LabeledStateSets::new();
    for g in &goals {
        sets.insert_goal(g.clone());
    }
    for s in dminus.states() {
        if sets.nongoal_len() < 10 {
            sets.insert_nongoal(s.clone());
        }
    }
    assert_eq!(sets.nongoal_len(), 10);
    // rejects the first goal by its agent position; no other goal shares it
    let a = goals[0].agent_pos();
    let src = GO_TO.replace(
        "if p == front_pos(s)",
        &format!("if p == front_pos(s) && agent_pos(s) != pos({}.0, {}.0)", a.x, a.y),
    );
    let r = compute_fitness(&parse_program(&src).unwrap(), &sets, 50.0).unwrap();
    assert_eq!(r.fitness, 0.75);
    assert_eq!(r.false_negatives.len(), 1);
    assert_eq!(r.false_negatives[0].state, goals[0]);
    assert!(r.false_positives.is_empty());
}

#[test]
fn misclassified_sorted_by_confidence() {
    let (dplus, dminus) = data("GoToObj", 3, 6);
    let sets = sets_from_labels(&dplus, &dminus);
    let p = parse_program("fn reward(s, instr) { return 20.0 * agent_pos(s).x + 5.0 * agent_pos(s).y }").unwrap();
    let r = compute_fitness(&p, &sets, 50.0).unwrap();
    for list in [&r.false_negatives, &r.false_positives] {
        for w in list.windows(2) {
            assert!((w[0].value - 50.0).abs() >= (w[1].value - 50.0).abs());
        }
    }
    for m in &r.false_positives {
        assert_eq!(p.evaluate(&m.state).debug_trace, m.debug_trace);
        assert_eq!(p.evaluate(&m.state).reward(), m.value);
    }
}

#[test]
fn empty_goal_set_is_an_error() {
    let mut sets = LabeledStateSets::new();
    let (_, dminus) = data("GoToObj", 0, 2);
    for s in dminus.states() {
        sets.insert_nongoal(s.clone());
    }
    let p = parse_program("fn reward(s, instr) { return 0.0 }").unwrap();
    assert_eq!(compute_fitness(&p, &sets, 50.0).unwrap_err(), FitnessError::NoGoalStates);
}

#[test]
fn eval_errors_count_as_zero() {
    let (dplus, dminus) = data("GoToObj", 2, 2);
    let sets = sets_from_labels(&dplus, &dminus);
    let p = parse_program("fn reward(s, instr) { return 100.0 / (agent_pos(s).x - agent_pos(s).x) }").unwrap();
    let r = compute_fitness(&p, &sets, 50.0).unwrap();
    assert_eq!(r.eval_errors, sets.goal_len() + sets.nongoal_len());
    assert_eq!(r.fitness, -0.0 + 0.0);
}

#[test]
fn identity_on_constant_and_perfect() {
    let (dplus, dminus) = data("GoToObj", 4, 4);
    let constant = parse_program("fn reward(s, instr) { return 100.0 }").unwrap();
    assert_eq!(masked_return_sides(&constant, &dplus, &dminus, 50.0).unwrap(), (0.0, 0.0));
    let perfect = parse_program(GO_TO).unwrap();
    assert_eq!(masked_return_sides(&perfect, &dplus, &dminus, 50.0).unwrap(), (1.0, 1.0));
    assert!(masked_return_identity_check(&perfect, &dplus, &dminus, 50.0).unwrap());
    let mut unlabeled = dplus.clone();
    unlabeled.trajectories[1].goal_indices.clear();
    assert_eq!(
        masked_return_identity_check(&perfect, &unlabeled, &dminus, 50.0).unwrap_err(),
        FitnessError::Unlabeled(1)
    );
}

#[test]
fn oracle_labels_expert_final_state_only() {
    let env = Env::new(EnvConfig::new("GoToObj", 6)).unwrap();
    for seed in 0..20 {
        let t = env.expert_rollout(seed).unwrap();
        assert_eq!(label_oracle(&t, 0).goal_indices, vec![t.len()]);
    }
    let t = env.random_rollout(5);
    if !t.states().any(|s| env.success(s)) {
        assert!(label_oracle(&t, 0).is_none());
    }
}

#[test]
fn oracle_counts_lingering_goal_states() {
    use evoreward::gridworld::Action;
    use evoreward::trajectory::Provenance;
    let env = Env::new(EnvConfig::new("GoToObj", 6)).unwrap();
    let t = env.expert_rollout(3).unwrap();
    let mut actions: Vec<Action> = t.steps[..t.len() - 1].iter().map(|s| Action::from_id(s.action).unwrap()).collect();
    // toggling a non-door object changes nothing, so the agent stays at the goal
    actions.extend([Action::Toggle, Action::Toggle]);
    let lingering = evoreward::gridworld::transition;
    let mut steps = Vec::new();
    let mut s = t.steps[0].state.clone();
    for a in &actions {
        steps.push(evoreward::trajectory::Step { state: s.clone(), action: a.id() });
        s = lingering(&s, *a);
    }
    steps.push(evoreward::trajectory::Step { state: s, action: Action::Done.id() });
    let traj = Trajectory {
        task_id: t.task_id.clone(),
        instruction: t.instruction.clone(),
        steps,
        provenance: Provenance::Expert,
        goal_indices: vec![],
    };
    let n = traj.len();
    assert_eq!(label_oracle(&traj, 0).goal_indices, vec![n - 2, n - 1, n]);
}

#[test]
fn goal_precedence_and_coverage() {
    let (dplus, mut dminus) = data("GoToObj", 1, 1);
    // a random trajectory that happens to contain the expert's goal state
    dminus.trajectories[0].steps.push(dplus.trajectories[0].steps.last().unwrap().clone());
    let labels = stored_labels(&dplus);
    let sets = build_labeled_sets(&dplus, &dminus, &labels).unwrap();
    assert_eq!(sets.goal_len(), 1);
    assert!(sets.is_goal(dplus.trajectories[0].final_state()));
    let distinct: std::collections::HashSet<_> = dplus.states().chain(dminus.states()).map(|s| s.key()).collect();
    assert_eq!(sets.goal_len() + sets.nongoal_len(), distinct.len());
    for s in sets.nongoal_states() {
        assert!(!sets.is_goal(s));
    }
}

#[test]
fn one_expert_and_one_random_of_five_states() {
    let (dplus, dminus) = data("GoToObj", 20, 20);
    let e = dplus.trajectories.iter().find(|t| t.len() == 5).cloned();
    let Some(mut e) = e else { return };
    e.goal_indices = vec![5];
    let mut r = dminus.trajectories[0].clone();
    r.steps.truncate(5);
    let dp = TrajectoryDataset::new(vec![e]);
    let dm = TrajectoryDataset::new(vec![r]);
    let sets = build_labeled_sets(&dp, &dm, &stored_labels(&dp)).unwrap();
    assert_eq!(sets.goal_len(), 1);
    assert!(sets.nongoal_len() <= 9);
}

#[test]
fn build_sets_errors() {
    let (dplus, dminus) = data("GoToObj", 2, 2);
    assert!(matches!(build_labeled_sets(&dplus, &dminus, &[]), Err(LabelError::Missing(0))));
    let mut none = stored_labels(&dplus);
    for l in &mut none {
        l.goal_indices.clear();
    }
    assert!(matches!(build_labeled_sets(&dplus, &dminus, &none), Err(LabelError::NoGoalStates)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitness_ignores_insertion_order(seed in 0u64..1000, k in 1.0f64..6.0) {
        let (dplus, dminus) = data("GoToObj", 2 + seed % 3, 3);
        let p = parse_program(&format!("fn reward(s, instr) {{ return {k:.3} * 20.0 * agent_pos(s).x - 10.0 * agent_pos(s).y }}")).unwrap();
        let a = sets_from_labels(&dplus, &dminus);
        let mut rev_plus = dplus.clone();
        rev_plus.trajectories.reverse();
        let mut rev_minus = dminus.clone();
        rev_minus.trajectories.reverse();
        let b = sets_from_labels(&rev_plus, &rev_minus);
        let ra = compute_fitness(&p, &a, 50.0).unwrap();
        let rb = compute_fitness(&p, &b, 50.0).unwrap();
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn scaling_above_threshold_keeps_fitness(seed in 0u64..1000, c in 1.0f64..10.0) {
        let (dplus, dminus) = data("GoToObj", 2 + seed % 2, 3);
        let sets = sets_from_labels(&dplus, &dminus);
        let base = format!("fn reward(s, instr) {{ if agent_pos(s).x < {}.0 {{ return 100.0 }} return 0.0 }}", 1 + seed % 4);
        let scaled = base.replace("return 100.0", &format!("return {}", 100.0 * c)).replace("return 0.0", "return 0.0 * 2.0");
        let a = compute_fitness(&parse_program(&base).unwrap(), &sets, 50.0).unwrap();
        let b = compute_fitness(&parse_program(&scaled).unwrap(), &sets, 50.0).unwrap();
        prop_assert_eq!(a.fitness, b.fitness);
    }
}
