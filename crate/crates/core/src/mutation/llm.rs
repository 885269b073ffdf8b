use rand::seq::IteratorRandom;
use rand::Rng;

use super::{MutationContext, MutationError, MutationMode};
use crate::dsl::{parse_program, RewardProgram};
use crate::llm::prompts::{init_messages, mutation_messages, shaping_messages, with_reminder, FeedbackItem, CODE_KEYS};
use crate::llm::{parse_json_payload, LlmGateway, Message, MUTATION_TEMPERATURE};
use crate::sets::LabeledStateSets;
use crate::state::GridState;
use crate::trajectory::Trajectory;

/// Sends `messages`, extracts and parses the program, and re-prompts once
/// with the error when the reply is unusable.
fn request_program(gateway: &LlmGateway, messages: Vec<Message>) -> Result<RewardProgram, MutationError> {
    let reply = gateway.complete(&gateway.request(messages.clone(), MUTATION_TEMPERATURE))?;
    let err = match extract(&reply) {
        Ok(p) => return Ok(p),
        Err(e) => e,
    };
    log::info!("re-prompting after unusable program: {err}");
    let retry = with_reminder(messages, &reply, &err, CODE_KEYS);
    let reply = gateway.complete(&gateway.request(retry, MUTATION_TEMPERATURE))?;
    extract(&reply).map_err(MutationError::Unparseable)
}

fn extract(reply: &str) -> Result<RewardProgram, String> {
    let map = parse_json_payload(reply, CODE_KEYS).map_err(|e| e.to_string())?;
    let code = map["reward_class_code"]
        .as_str()
        .ok_or_else(|| "reward_class_code must be a string".to_string())?;
    parse_program(code).map_err(|e| e.to_string())
}

pub fn init_program_llm(
    sets: &LabeledStateSets,
    index: usize,
    gateway: &LlmGateway,
    rng: &mut impl Rng,
) -> Result<RewardProgram, MutationError> {
    let goals: Vec<&GridState> = sets.goal_states().choose_multiple(rng, 3);
    let nongoals: Vec<&GridState> = sets.nongoal_states().choose_multiple(rng, 3);
    let instruction = goals.first().map(|s| s.instruction.as_str()).unwrap_or_default();
    request_program(gateway, init_messages(instruction, index, goals.iter().copied(), nongoals.iter().copied()))
}

fn rewards(p: &RewardProgram, t: &Trajectory) -> Vec<f64> {
    t.states().map(|s| p.evaluate(s).reward()).collect()
}

pub fn mutate_llm(ctx: &MutationContext, gateway: &LlmGateway) -> Result<RewardProgram, MutationError> {
    let messages = match ctx.mode {
        MutationMode::ClassifyFix => {
            let feedback: Vec<FeedbackItem> = ctx
                .feedback_states
                .iter()
                .map(|f| FeedbackItem {
                    state: &f.state,
                    value: f.value,
                    is_goal: f.is_goal,
                    debug_trace: &f.debug_trace,
                })
                .collect();
            let expert: Vec<&GridState> = match &ctx.expert_trajectory {
                Some(t) => t.states().collect(),
                None => ctx.paired_expert_state.iter().collect(),
            };
            mutation_messages(ctx.source(), &feedback, &expert)
        }
        MutationMode::ShapingFix => {
            let expert: Vec<Vec<f64>> = ctx.expert_trajectories.iter().map(|t| rewards(&ctx.parent, t)).collect();
            let failed: Vec<Vec<f64>> = ctx.failed_trajectories.iter().map(|t| rewards(&ctx.parent, t)).collect();
            shaping_messages(ctx.source(), &expert, &failed)
        }
    };
    let mut child = request_program(gateway, messages)?;
    child.created_generation = ctx.parent.created_generation;
    Ok(child)
}
