//! Scores a hand-written program on labeled train and test sets and lists
//! what it gets wrong.
//!
//! cargo run --example fitness_report -- [task]

use evoreward::dsl::parse_program;
use evoreward::fitness::{compute_fitness, DEFAULT_TAU};
use evoreward::orchestrator::{prepare_splits, LoopConfig};
use evoreward::render::render_state_text;

const ADJACENT: &str = r#"
fn reward(s, instr) {
    for p in find_all(s, instr_object(instr, 0), "any") {
        if adjacent(p, agent_pos(s)) { return 100.0 }
    }
    return 0.0
}
"#;

fn main() -> anyhow::Result<()> {
    let mut config = LoopConfig::default();
    if let Some(task) = std::env::args().nth(1) {
        config.data.task = task;
    }
    let splits = prepare_splits(&config, None)?;
    let program = parse_program(ADJACENT)?;
    for (name, sets) in [("train", splits.train_sets()), ("test", splits.test_sets())] {
        let r = compute_fitness(&program, &sets, DEFAULT_TAU)?;
        println!(
            "{name}: fitness {:.3}  ({} goal, {} non-goal, {} FN, {} FP)",
            r.fitness,
            r.goal_count,
            r.nongoal_count,
            r.false_negatives.len(),
            r.false_positives.len()
        );
        if let Some(m) = r.false_positives.first() {
            println!("most confident false positive (value {}):\n{}", m.value, render_state_text(&m.state));
        }
    }
    Ok(())
}
