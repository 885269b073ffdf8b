//! Trains the linear policy on a task with a reward program and reports
//! greedy success.
//!
//! cargo run --release --example train_rl -- GoToObj 200000 [reward.rwd]

use evoreward::dsl::parse_program;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::rl::{eval_success, train_policy, RlConfig};

const SPARSE_GO_TO: &str = r#"
fn reward(s, instr) {
    for p in find_all(s, instr_object(instr, 0), instr_color(instr, 0)) {
        if p == front_pos(s) { return 100.0 }
    }
    return 0.0
}
"#;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "GoToObj".into());
    let budget: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200_000);
    let source = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => SPARSE_GO_TO.to_string(),
    };
    let reward = parse_program(&source)?;
    let env = Env::new(EnvConfig::new(&task, 6))?;
    let config = RlConfig { budget, ..RlConfig::default() };
    let t0 = std::time::Instant::now();
    let out = train_policy(&env, &reward, &config, 0, None)?;
    for (i, s) in out.batch_success.iter().enumerate().filter(|(i, _)| i % 10 == 0) {
        println!("batch {i:4}  train success {s:.3}");
    }
    let rate = eval_success(&out.policy, &env, 100, 7)?;
    println!("steps {}  greedy success {rate:.2}  ({:.1?})", out.env_steps, t0.elapsed());
    Ok(())
}
