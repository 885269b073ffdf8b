//! Prompt assembly from the templates under `resources/prompts`.

use std::fmt::Write;

use super::Message;
use crate::dsl::BUILTINS;
use crate::render::render_state_text;
use crate::state::GridState;

pub const SYSTEM: &str = include_str!("../../resources/prompts/system.txt");
pub const GOAL: &str = include_str!("../../resources/prompts/goal.txt");
pub const INIT: &str = include_str!("../../resources/prompts/init.txt");
pub const MUTATION: &str = include_str!("../../resources/prompts/mutation.txt");
pub const SHAPING: &str = include_str!("../../resources/prompts/shaping.txt");
pub const FORMAT_REMINDER: &str = include_str!("../../resources/prompts/format_reminder.txt");

pub const GOAL_KEYS: &[&str] = &["goal_state_indexes"];
pub const CODE_KEYS: &[&str] = &["reward_class_code"];

/// Replaces each `{name}` slot in `template`.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// Syntax summary and builtin table shown to the model.
pub fn language_reference() -> String {
    let mut out = String::from(
        "Language: functions are `fn name(a, b) { ... }`; the entry point is `fn reward(s, instr)` \
         where `s` is the state and `instr` the instruction text. Statements: `let x = e`, `x = e`, \
         `if c { } else { }`, `for p in list { }`, `while c { }`, `return e`, `debug(e, ...)`. \
         Numbers are floats (write 100.0), strings use double quotes, booleans are true/false, \
         operators are + - * / % == != < <= > >= && || !, positions have .x (column) and .y (row). \
         Recursion is not allowed.\nBuiltins:\n",
    );
    for b in BUILTINS {
        let params: Vec<&str> = b.params.iter().map(|t| t.name()).collect();
        let _ = writeln!(out, "- {}({}) -> {}: {}", b.name, params.join(", "), b.ret.name(), b.doc);
    }
    out
}

fn numbered_states<'a>(states: impl IntoIterator<Item = &'a GridState>) -> String {
    let mut out = String::new();
    for (i, s) in states.into_iter().enumerate() {
        let _ = writeln!(out, "State {}:\n{}", i + 1, render_state_text(s));
    }
    out
}

fn state_list<'a>(states: impl IntoIterator<Item = &'a GridState>) -> String {
    let mut out = String::new();
    for s in states {
        let _ = writeln!(out, "{}", render_state_text(s));
    }
    out
}

pub fn goal_messages<'a>(
    instruction: &str,
    states: impl IntoIterator<Item = &'a GridState>,
    current_reward: Option<&str>,
) -> Vec<Message> {
    let reward_section = match current_reward {
        Some(src) => format!("For reference, the current reward function is:\n{src}\n"),
        None => String::new(),
    };
    let states = numbered_states(states);
    vec![
        Message::system(SYSTEM.trim()),
        Message::user(fill(
            GOAL,
            &[
                ("instruction", instruction),
                ("states", &states),
                ("reward_section", &reward_section),
            ],
        )),
    ]
}

pub fn init_messages<'a>(
    instruction: &str,
    draft: usize,
    goal_states: impl IntoIterator<Item = &'a GridState>,
    nongoal_states: impl IntoIterator<Item = &'a GridState>,
) -> Vec<Message> {
    vec![
        Message::system(SYSTEM.trim()),
        Message::user(fill(
            INIT,
            &[
                ("instruction", instruction),
                ("draft", &(draft + 1).to_string()),
                ("language", &language_reference()),
                ("goal_states", &state_list(goal_states)),
                ("nongoal_states", &state_list(nongoal_states)),
            ],
        )),
    ]
}

/// One feedback entry: the state, the value it received, whether it is a
/// goal state, and the program's debug output on it.
pub struct FeedbackItem<'a> {
    pub state: &'a GridState,
    pub value: f64,
    pub is_goal: bool,
    pub debug_trace: &'a [String],
}

pub fn mutation_messages(source: &str, feedback: &[FeedbackItem<'_>], expert_states: &[&GridState]) -> Vec<Message> {
    let mut fb = String::new();
    for item in feedback {
        let verdict = if item.is_goal {
            "completes the instruction but scored too low"
        } else {
            "does not complete the instruction but scored too high"
        };
        let _ = writeln!(fb, "{}\nreward: {} ({verdict})", render_state_text(item.state), item.value);
        if !item.debug_trace.is_empty() {
            let _ = writeln!(fb, "debug:\n{}", item.debug_trace.join("\n"));
        }
        fb.push('\n');
    }
    let expert_section = if expert_states.is_empty() {
        String::new()
    } else {
        format!(
            "For comparison, states from a demonstration that completes the instruction (the last one is completed):\n{}",
            state_list(expert_states.iter().copied())
        )
    };
    vec![
        Message::system(SYSTEM.trim()),
        Message::user(fill(
            MUTATION,
            &[
                ("source", source),
                ("language", &language_reference()),
                ("feedback", &fb),
                ("expert_section", &expert_section),
            ],
        )),
    ]
}

/// Rewards along each sequence, one line per sequence.
pub fn reward_sequences(sequences: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (i, seq) in sequences.iter().enumerate() {
        let vals: Vec<String> = seq.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(out, "sequence {}: {}", i + 1, vals.join(", "));
    }
    out
}

pub fn shaping_messages(source: &str, expert: &[Vec<f64>], failed: &[Vec<f64>]) -> Vec<Message> {
    vec![
        Message::system(SYSTEM.trim()),
        Message::user(fill(
            SHAPING,
            &[
                ("source", source),
                ("language", &language_reference()),
                ("expert_sequences", &reward_sequences(expert)),
                ("failed_sequences", &reward_sequences(failed)),
            ],
        )),
    ]
}

/// The conversation extended with the rejected reply and a format reminder.
pub fn with_reminder(mut messages: Vec<Message>, reply: &str, error: &str, keys: &[&str]) -> Vec<Message> {
    messages.push(Message::assistant(reply));
    let keys: Vec<String> = keys.iter().map(|k| format!("`{k}`")).collect();
    messages.push(Message::user(fill(
        FORMAT_REMINDER,
        &[("error", error), ("keys", &keys.join(", "))],
    )));
    messages
}
