use evoreward::dsl::parse_program_at;
use evoreward::fitness::FitnessReport;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::labeler::{sets_from_labels, Labeler};
use evoreward::mutation::Mutator;
use evoreward::search::{evo_search_round, evolve, init_population, select_parent, Member, Population, SearchConfig};
use evoreward::trajectory::{Trajectory, TrajectoryDataset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn member(fitness: f64, generation: usize, tag: usize) -> Member {
    Member {
        program: parse_program_at(&format!("fn reward(s, instr) {{ return {tag}.0 }}"), generation).unwrap(),
        report: FitnessReport {
            fitness,
            tau: 50.0,
            false_negatives: vec![],
            false_positives: vec![],
            eval_errors: 0,
            goal_count: 1,
            nongoal_count: 1,
        },
    }
}

fn population(fitness: &[f64]) -> Population {
    Population {
        members: fitness.iter().enumerate().map(|(i, &f)| member(f, 0, i)).collect(),
        capacity: fitness.len(),
        elite_count: 1.min(fitness.len() - 1),
        generation: 0,
    }
}

fn tag(m: &Member) -> usize {
    m.program.source.split("return ").nth(1).unwrap().split('.').next().unwrap().parse().unwrap()
}

#[test]
fn equal_fitness_selection_is_uniform() {
    let p = 5;
    let pop = population(&vec![0.3; p]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut counts = vec![0usize; p];
    for _ in 0..n {
        counts[tag(select_parent(&pop, &mut rng))] += 1;
    }
    let expected = n as f64 / p as f64;
    let sigma = (n as f64 * (1.0 / p as f64) * (1.0 - 1.0 / p as f64)).sqrt();
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    for &c in &counts {
        assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
    }
    // 99.9% quantile of chi-square with 4 degrees of freedom
    assert!(chi2 < 18.47, "chi2 = {chi2}");
}

#[test]
fn selection_ratio_follows_exp_fitness() {
    let pop = population(&[1.0, -1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hi = 0usize;
    let n = 100_000;
    for _ in 0..n {
        hi += (tag(select_parent(&pop, &mut rng)) == 0) as usize;
    }
    let ratio = hi as f64 / (n - hi) as f64;
    let e2 = (2.0f64).exp();
    assert!((ratio - e2).abs() / e2 < 0.05, "ratio {ratio}");
}

#[test]
fn single_member_is_always_selected() {
    let pop = Population {
        members: vec![member(0.1, 0, 7)],
        capacity: 1,
        elite_count: 0,
        generation: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(tag(select_parent(&pop, &mut rng)), 7);
}

#[test]
fn admission_is_strict() {
    let mut pop = population(&[0.5, 0.2, 0.2, 0.9]);
    assert!(!pop.admit(member(0.2, 1, 10)));
    assert_eq!(pop.min_fitness(), 0.2);
    assert!(pop.admit(member(0.3, 1, 11)));
    assert_eq!(pop.members.len(), 4);
    // one of the two minima left; the minimum did not decrease
    assert_eq!(pop.min_fitness(), 0.2);
    assert!(pop.admit(member(0.3, 1, 12)));
    assert_eq!(pop.min_fitness(), 0.3);
}

#[test]
fn elites_survive_eviction() {
    let mut pop = Population {
        members: vec![member(0.0, 0, 0), member(0.0, 0, 1), member(0.0, 0, 2), member(-0.5, 0, 3)],
        capacity: 4,
        elite_count: 3,
        generation: 0,
    };
    assert!(pop.admit(member(0.1, 1, 9)));
    let tags: Vec<usize> = pop.members.iter().map(tag).collect();
    assert!(!tags.contains(&3) && tags.contains(&9));
}

#[test]
fn best_breaks_ties_by_generation_then_source() {
    let pop = Population {
        members: vec![member(1.0, 7, 1), member(1.0, 3, 2), member(0.5, 0, 3)],
        capacity: 3,
        elite_count: 1,
        generation: 7,
    };
    assert_eq!(tag(&pop.best()), 2);
    let pop = Population {
        members: vec![member(1.0, 3, 5), member(1.0, 3, 4)],
        capacity: 2,
        elite_count: 1,
        generation: 3,
    };
    assert_eq!(tag(&pop.best()), 4);
}

fn go_to_data(experts: u64, seed: u64) -> (TrajectoryDataset, TrajectoryDataset) {
    let env = Env::new(EnvConfig::new("GoToObj", 6)).unwrap();
    let mut dplus: TrajectoryDataset = (0..experts).map(|s| env.expert_rollout(seed * 100 + s).unwrap()).collect();
    let mut dminus: TrajectoryDataset = (0..experts)
        .map(|s| env.random_rollout(seed * 100 + 50 + s))
        .filter(|t: &Trajectory| !env.success(t.final_state()))
        .collect();
    Labeler::Oracle.label_dataset(&mut dplus).unwrap();
    Labeler::Oracle.label_dataset(&mut dminus).unwrap();
    (dplus, dminus)
}

#[test]
fn perfect_population_skips_the_round() {
    let (dplus, dminus) = go_to_data(3, 0);
    let sets = sets_from_labels(&dplus, &dminus);
    let mut pop = population(&[1.0, 0.5]);
    let stats = evo_search_round(&mut pop, &sets, &dplus, &Mutator::RuleBased, &SearchConfig::default());
    assert_eq!(stats.mutations_attempted, 0);
    assert_eq!(stats.max_fitness, 1.0);
}

#[test]
fn config_validation() {
    let bad = SearchConfig {
        elite_count: 20,
        ..SearchConfig::default()
    };
    assert!(bad.validate().is_err());
    assert!(SearchConfig {
        mutation_steps: 0,
        ..SearchConfig::default()
    }
    .validate()
    .is_err());
    assert!(SearchConfig::default().validate().is_ok());
}

#[test]
fn seeded_search_is_reproducible_and_monotone() {
    let (dplus, dminus) = go_to_data(4, 1);
    let sets = sets_from_labels(&dplus, &dminus);
    let config = SearchConfig {
        rng_seed: 3,
        ..SearchConfig::default()
    };
    let run = || {
        let mut pop = init_population(&sets, &Mutator::RuleBased, &config).unwrap();
        let stats = evolve(&mut pop, &sets, &dplus, &Mutator::RuleBased, &config, 15);
        (pop, stats)
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_eq!(a.members.len(), config.population_size);
    for w in sa.windows(2) {
        assert!(w[1].max_fitness >= w[0].max_fitness);
    }
    for m in &a.members {
        assert!((-1.0..=1.0).contains(&m.fitness()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admission_keeps_capacity_and_max(
        fitness in prop::collection::vec(-1.0f64..1.0, 2..10),
        offspring in prop::collection::vec(-1.0f64..1.0, 1..30),
    ) {
        let mut pop = population(&fitness);
        let cap = pop.members.len();
        for (i, f) in offspring.into_iter().enumerate() {
            let (max, min) = (pop.max_fitness(), pop.min_fitness());
            let admitted = pop.admit(member(f, 1, 100 + i));
            prop_assert_eq!(admitted, f > min);
            prop_assert_eq!(pop.members.len(), cap);
            prop_assert!(pop.max_fitness() >= max);
            prop_assert!(pop.min_fitness() >= min);
        }
    }
}
