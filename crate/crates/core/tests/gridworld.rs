use evoreward::gridworld::{Env, EnvConfig, Goal, TaskKind};
use evoreward::state::{door, ObjectKind};
use evoreward::trajectory::Provenance;

fn env(task: &str, size: usize) -> Env {
    Env::new(EnvConfig::new(task, size)).unwrap()
}

#[test]
fn expert_solves_every_task_most_of_the_time() {
    for kind in TaskKind::SINGLE {
        let size = if kind == TaskKind::SortColors { 7 } else { 6 };
        let e = env(kind.id(), size);
        let mut solved = 0;
        for seed in 0..100 {
            if let Ok(t) = e.expert_rollout(seed) {
                assert_eq!(t.provenance, Provenance::Expert);
                assert!(e.success(t.final_state()));
                assert!(t.validate().is_ok());
                solved += 1;
            }
        }
        assert!(solved >= 90, "{}: solved {solved}/100", kind.id());
    }
}

#[test]
fn go_to_expert_reaches_goal_only_at_the_end() {
    for task in ["GoToObj", "GoToRedBall"] {
        let e = env(task, 6);
        for seed in 0..50 {
            let Ok(t) = e.expert_rollout(seed) else { continue };
            let n = t.len();
            for (i, s) in t.states().enumerate() {
                assert_eq!(e.success(s), i == n - 1, "{task} seed {seed} step {i}");
            }
            // agent adjacent to and facing the target
            let last = t.final_state();
            let Some(Goal::GoTo(o, c)) = Goal::parse(&last.instruction) else { panic!() };
            let front = last.get(last.front_pos()).unwrap();
            assert_eq!((front.object, front.color), (o, c));
            assert_eq!(last.front_pos().manhattan(last.agent_pos()), 1);
        }
    }
}

#[test]
fn open_two_doors_expert_opens_in_order() {
    let e = env("OpenTwoDoors", 6);
    for seed in 0..30 {
        let t = e.expert_rollout(seed).unwrap();
        let Some(Goal::OpenTwo(first, second)) = Goal::parse(&t.instruction) else { panic!() };
        let is_open = |s: &evoreward::state::GridState, c| {
            s.find(ObjectKind::Door, Some(c))
                .iter()
                .any(|&p| s.ground(p).unwrap().extra == door::OPEN)
        };
        let first_open = t.states().position(|s| is_open(s, first)).unwrap();
        let second_open = t.states().position(|s| is_open(s, second)).unwrap();
        assert!(first_open < second_open);
        assert_eq!(second_open, t.len() - 1);
    }
}

#[test]
fn random_rollouts_record_success_honestly() {
    let e = env("GoToObj", 6);
    let mut successes = 0;
    for seed in 0..100 {
        let t = e.random_rollout(seed);
        assert_eq!(t.provenance, Provenance::Random);
        assert!(t.len() <= 100);
        let ok = e.success(t.final_state());
        if ok {
            successes += 1;
        } else {
            assert_eq!(t.len(), 100);
        }
        // no state before the last one is a success
        assert!(t.states().take(t.len() - 1).all(|s| !e.success(s)));
    }
    assert!(successes < 100);
}
