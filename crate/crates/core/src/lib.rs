pub mod dsl;
pub mod fitness;
pub mod gridworld;
pub mod labeler;
pub mod llm;
pub mod mutation;
pub mod orchestrator;
pub mod render;
pub mod rl;
pub mod search;
pub mod sets;
pub mod state;
pub mod trajectory;
