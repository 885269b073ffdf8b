//! Adds progress stages to an evolved two-door reward and compares policy
//! success with and without them at a small budget.
//!
//! cargo run --release --example shaping -- [budget]

use evoreward::dsl::RewardProgram;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::mutation::shaping_edit;
use evoreward::orchestrator::{run_loop, LoopConfig};
use evoreward::rl::{eval_success, shaping_audit, train_policy, RlConfig};
use evoreward::trajectory::load_dataset;

fn main() -> anyhow::Result<()> {
    let budget: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30_000);
    let mut c = LoopConfig::default();
    c.data.task = "OpenTwoDoors".into();
    c.search.generations = 40;
    c.rl.shaping_fitness = f64::INFINITY;
    let dir = tempfile::tempdir()?;
    let m = run_loop(&c, dir.path(), None, false)?;
    let demos = load_dataset(&dir.path().join("data/train_plus.jsonl"))?;
    let shaped = RewardProgram::from_ast(
        shaping_edit(&m.best.program, &demos.trajectories).ok_or_else(|| anyhow::anyhow!("nothing to shape"))?,
        0,
    )?;
    println!("{}", shaped.source);
    println!("audit on demonstrations: {:.3}", shaping_audit(&shaped, &demos));

    let env = Env::new(EnvConfig::new("OpenTwoDoors", 6))?;
    let config = RlConfig {
        budget,
        ..RlConfig::default()
    };
    for (name, reward) in [("unshaped", &m.best), ("shaped", &shaped)] {
        let rates: Vec<f64> = (0..3)
            .map(|seed| {
                let out = train_policy(&env, reward, &config, seed, None)?;
                Ok(eval_success(&out.policy, &env, 100, seed + 1000)?)
            })
            .collect::<anyhow::Result<_>>()?;
        println!("{name:9} greedy success at {budget} steps: {rates:?}");
    }
    Ok(())
}
