//! Labels demonstrations with the oracle, then asks a local stand-in for a
//! chat model to do the same and compares the answers.
//!
//! cargo run --example label_goals

use evoreward::gridworld::{Env, EnvConfig};
use evoreward::labeler::{label_llm, label_oracle};
use evoreward::llm::stub::StubServer;
use evoreward::llm::{CacheMode, GatewayConfig, LlmGateway, TranscriptCache};

fn main() -> anyhow::Result<()> {
    let env = Env::new(EnvConfig::new("OpenDoorColor", 6))?;
    let demos = env.generate_dataset(4, 0, 11);

    // the stand-in always names the last state it was shown
    let server = StubServer::start(|req| {
        let text = &req.messages.last().unwrap().content;
        let last = text.matches("State ").count().max(1);
        format!(r#"{{"reasoning": "the door is open at the end", "goal_state_indexes": [{last}]}}"#)
    })?;
    let gateway = LlmGateway::new(
        GatewayConfig {
            endpoint: Some(server.url.clone()),
            ..GatewayConfig::default()
        },
        TranscriptCache::in_memory(CacheMode::Live),
    );

    for (i, t) in demos.trajectories.iter().enumerate() {
        let oracle = label_oracle(t, i);
        let model = match label_llm(t, i, &gateway, None) {
            Ok(r) => format!("{:?}", r.goal_indices),
            Err(e) => format!("error: {e}"),
        };
        println!("{:40} {} states  oracle {:?}  model {model}", t.instruction, t.len(), oracle.goal_indices);
    }
    println!("{} requests sent", server.requests());
    Ok(())
}
