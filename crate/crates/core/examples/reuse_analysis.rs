//! Searches on a task that takes several generations and prints how often
//! accepted programs introduce new helpers versus reuse known ones.
//!
//! cargo run --release --example reuse_analysis -- [task] [seed]

use evoreward::orchestrator::reuse::thirds;
use evoreward::orchestrator::{run_loop, LoopConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut c = LoopConfig::default();
    c.data.task = args.next().unwrap_or_else(|| "OpenTwoDoors".into());
    c.search.seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    c.rl.budget = 0;
    let dir = tempfile::tempdir()?;
    let m = run_loop(&c, dir.path(), None, false)?;
    println!("generation  new  reused");
    for r in &m.reuse.per_generation {
        println!("{:10}  {:3}  {:6}", r.generation, r.new_helpers, r.reused_helpers);
    }
    let (first, last) = thirds(&m.reuse.per_generation);
    println!("new helpers: first third {first}, last third {last}");
    let mut popular: Vec<_> = m.reuse.programs_per_helper.iter().collect();
    popular.sort_by(|a, b| b.1.cmp(a.1));
    for (hash, n) in popular.iter().take(5) {
        let calls = m.reuse.calls_per_helper.get(*hash).copied().unwrap_or(0);
        println!("{}  in {n} programs, {calls} call sites", &hash[..12]);
    }
    Ok(())
}
