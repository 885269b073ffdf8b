//! Evolves a reward program for a task from eight demonstrations and eight
//! random rollouts, using the rule-based mutator, then scores it on held-out
//! episodes.
//!
//! cargo run --release --example evolve_rule_based -- GoToObj 0

use evoreward::fitness::compute_fitness;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::labeler::{sets_from_labels, Labeler};
use evoreward::mutation::Mutator;
use evoreward::search::{evolve, init_population, SearchConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "GoToObj".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let env = Env::new(EnvConfig::new(&task, 6))?;

    let mut train = env.generate_dataset(8, 8, seed * 1000);
    let mut test = env.generate_dataset(50, 50, seed * 1000 + 500);
    Labeler::Oracle.label_dataset(&mut train)?;
    Labeler::Oracle.label_dataset(&mut test)?;
    let expert = |d: &evoreward::trajectory::TrajectoryDataset, p| d.with_provenance(p);
    use evoreward::trajectory::Provenance::{Expert, Random};
    let (dplus, dminus) = (expert(&train, Expert), expert(&train, Random));
    let sets = sets_from_labels(&dplus, &dminus);
    let test_sets = sets_from_labels(&expert(&test, Expert), &expert(&test, Random));

    let config = SearchConfig { rng_seed: seed, ..SearchConfig::default() };
    let mut pop = init_population(&sets, &Mutator::RuleBased, &config)?;
    let t0 = std::time::Instant::now();
    let rounds = evolve(&mut pop, &sets, &dplus, &Mutator::RuleBased, &config, config.generations);
    for r in &rounds {
        println!("gen {:3}  max {:.3}  mean {:.3}  accepted {}", r.generation, r.max_fitness, r.mean_fitness, r.mutations_accepted);
    }
    let best = pop.best();
    let test_fit = compute_fitness(&best.program, &test_sets, config.tau)?;
    println!("\n{}", best.program.source);
    println!("train {:.3}  test {:.3}  ({:.1?})", best.fitness(), test_fit.fitness, t0.elapsed());
    Ok(())
}
