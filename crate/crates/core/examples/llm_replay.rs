//! Runs a few generations of search with the model-driven mutator against
//! a local stand-in server while recording transcripts, then replays the
//! same run offline and checks that the metrics match byte for byte.
//!
//! cargo run --example llm_replay

use std::path::Path;

use evoreward::llm::stub::StubServer;
use evoreward::llm::{CacheMode, GatewayConfig, LlmGateway, TranscriptCache};
use evoreward::orchestrator::{run_loop, LoopConfig, MutatorKind};

const PROGRAMS: [&str; 4] = [
    "fn reward(s, instr) { if object_at(s, front_pos(s)) == instr_object(instr, 0) { return 100.0 } return 0.0 }",
    "fn reward(s, instr) { if color_at(s, front_pos(s)) == instr_color(instr, 0) { return 100.0 } return 0.0 }",
    "fn reward(s, instr) { if agent_dir(s) == 1 { return 100.0 } return 0.0 }",
    "fn reward(s, instr) { return 5.0 }",
];

fn run(cache: &Path, mode: CacheMode, endpoint: Option<String>, out: &Path) -> anyhow::Result<usize> {
    let gateway = LlmGateway::new(
        GatewayConfig {
            endpoint,
            ..GatewayConfig::default()
        },
        TranscriptCache::open(cache, mode)?,
    );
    let mut c = LoopConfig::default();
    c.search.mutator = MutatorKind::Llm;
    c.search.population_size = 6;
    c.search.elite_count = 2;
    c.search.mutation_steps = 4;
    c.search.generations = 5;
    c.rl.budget = 0;
    let m = run_loop(&c, out, Some(&gateway), false)?;
    println!(
        "{mode:?}: {} generations, best {:.3}, {} calls, {} over the network",
        m.rows.len(),
        m.best_report.fitness,
        gateway.calls(),
        gateway.network_calls()
    );
    Ok(gateway.calls())
}

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let cache = dir.path().join("transcripts.jsonl");
    let server = StubServer::start(|req| {
        let k = usize::from_str_radix(&req.request_hash()[..8], 16).unwrap();
        serde_json::json!({"reasoning": "", "reward_class_code": PROGRAMS[k % PROGRAMS.len()]}).to_string()
    })?;
    run(&cache, CacheMode::Record, Some(server.url.clone()), &dir.path().join("a"))?;
    drop(server);
    run(&cache, CacheMode::Replay, None, &dir.path().join("b"))?;
    let a = std::fs::read(dir.path().join("a/metrics.csv"))?;
    let b = std::fs::read(dir.path().join("b/metrics.csv"))?;
    println!("metrics identical: {}", a == b);
    Ok(())
}
