//! The whole loop on one task: search, policy training, data expansion and
//! shaping, written to a run directory.
//!
//! cargo run --release --example run_loop -- [task] [out_dir]

use evoreward::orchestrator::{run_loop, LoopConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut c = LoopConfig::default();
    c.data.task = args.next().unwrap_or_else(|| "OpenTwoDoors".into());
    c.search.generations = 30;
    let out = args.next().map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("evoreward-run"));
    let m = run_loop(&c, &out, None, false)?;
    println!("{}", std::fs::read_to_string(out.join("metrics.csv"))?);
    for e in &m.events {
        println!("generation {}: {:?} {}", e.generation, e.kind, e.detail);
    }
    println!("best program (test fitness {:.3}):\n{}", m.test_report.fitness, m.best.source);
    println!("run directory: {}", out.display());
    Ok(())
}
