//! Parses a reward program, runs it on a few states of a demonstration and
//! prints each value with its trace, then the helper hashes.
//!
//! cargo run --example dsl_eval -- [program.rwd]

use evoreward::dsl::parse_program;
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::render::render_state_text;

const DEFAULT: &str = r#"
fn reward(s, instr) {
    if facing_target(s, instr) { return 100.0 }
    return 10.0 - distance_to_target(s, instr)
}

fn facing_target(s, instr) {
    return object_at(s, front_pos(s)) == instr_object(instr, 0)
        && color_at(s, front_pos(s)) == instr_color(instr, 0)
}

fn distance_to_target(s, instr) {
    let best = width(s) + height(s)
    for p in find_all(s, instr_object(instr, 0), instr_color(instr, 0)) {
        best = min(best, manhattan(p, agent_pos(s)))
    }
    return best
}
"#;

fn main() -> anyhow::Result<()> {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let program = parse_program(&source)?;
    println!("{}", program.source);

    let env = Env::new(EnvConfig::new("GoToObj", 6))?;
    let demo = env.expert_rollout(3)?;
    println!("{}", render_state_text(&demo.steps[0].state));
    for (t, s) in demo.states().enumerate() {
        let r = program.evaluate(s);
        println!("t={t:2}  value {:6.2}  steps {:4}  {:?}", r.reward(), r.steps_used, r.value.err());
        for line in r.debug_trace.iter().take(3) {
            println!("        {line}");
        }
    }
    for (name, hash) in &program.helpers {
        println!("helper {name}: {}", &hash[..16]);
    }
    Ok(())
}
