//! Goal-state identification and construction of the labeled state sets.

use serde_json::Value;
use thiserror::Error;

use crate::gridworld;
use crate::llm::prompts::{goal_messages, with_reminder, GOAL_KEYS};
use crate::llm::{parse_json_payload, LlmError, LlmGateway, LABELING_TEMPERATURE};
use crate::sets::LabeledStateSets;
use crate::trajectory::{Trajectory, TrajectoryDataset};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("trajectory {trajectory}: unusable labeling response after retry: {message}")]
    Format { trajectory: usize, message: String },
    #[error("trajectory {trajectory}: goal index {index} outside 1..={len}")]
    OutOfRange { trajectory: usize, index: i64, len: usize },
    #[error("trajectory {0} of the demonstrations has no label")]
    Missing(usize),
    #[error("no goal states among the labeled demonstrations")]
    NoGoalStates,
}

/// Goal indices for one trajectory. An empty list is the "none" sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelingResult {
    pub trajectory_id: usize,
    pub goal_indices: Vec<usize>,
    pub reasoning: String,
}

impl LabelingResult {
    pub fn is_none(&self) -> bool {
        self.goal_indices.is_empty()
    }
}

/// Every 1-based index whose state satisfies the task's success predicate.
pub fn label_oracle(traj: &Trajectory, trajectory_id: usize) -> LabelingResult {
    LabelingResult {
        trajectory_id,
        goal_indices: traj
            .states()
            .enumerate()
            .filter(|(_, s)| gridworld::success(s))
            .map(|(i, _)| i + 1)
            .collect(),
        reasoning: String::new(),
    }
}

fn indices_from_json(v: &Value, trajectory: usize, len: usize) -> Result<Vec<usize>, LabelError> {
    let raw: Vec<i64> = match v {
        Value::Number(n) => vec![n.as_i64().ok_or_else(|| format_err(trajectory, "index is not an integer"))?],
        Value::Array(items) => items
            .iter()
            .map(|i| i.as_i64().ok_or_else(|| format_err(trajectory, "index is not an integer")))
            .collect::<Result<_, _>>()?,
        Value::Null => vec![-1],
        _ => return Err(format_err(trajectory, "goal_state_indexes must be a list of integers")),
    };
    if raw == [-1] || raw.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(raw.len());
    for index in raw {
        if index < 1 || index as usize > len {
            return Err(LabelError::OutOfRange { trajectory, index, len });
        }
        out.push(index as usize);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn format_err(trajectory: usize, message: &str) -> LabelError {
    LabelError::Format {
        trajectory,
        message: message.into(),
    }
}

/// Asks the model which states complete the instruction. A malformed reply
/// is retried once with a format reminder; -1 maps to the "none" sentinel.
pub fn label_llm(
    traj: &Trajectory,
    trajectory_id: usize,
    gateway: &LlmGateway,
    current_reward: Option<&str>,
) -> Result<LabelingResult, LabelError> {
    let messages = goal_messages(&traj.instruction, traj.states(), current_reward);
    let req = gateway.request(messages.clone(), LABELING_TEMPERATURE);
    let reply = gateway.complete(&req)?;
    let map = match parse_json_payload(&reply, GOAL_KEYS) {
        Ok(map) => map,
        Err(e) => {
            log::info!("trajectory {trajectory_id}: re-prompting after {e}");
            let retry = gateway.request(with_reminder(messages, &reply, &e.to_string(), GOAL_KEYS), LABELING_TEMPERATURE);
            let reply = gateway.complete(&retry)?;
            parse_json_payload(&reply, GOAL_KEYS).map_err(|e| format_err(trajectory_id, &e.to_string()))?
        }
    };
    Ok(LabelingResult {
        trajectory_id,
        goal_indices: indices_from_json(&map["goal_state_indexes"], trajectory_id, traj.len())?,
        reasoning: map.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_string(),
    })
}

/// Which goal labeler to use.
#[derive(Clone, Copy)]
pub enum Labeler<'a> {
    Oracle,
    Llm {
        gateway: &'a LlmGateway,
        current_reward: Option<&'a str>,
    },
}

impl Labeler<'_> {
    pub fn label(&self, traj: &Trajectory, trajectory_id: usize) -> Result<LabelingResult, LabelError> {
        match self {
            Labeler::Oracle => Ok(label_oracle(traj, trajectory_id)),
            Labeler::Llm { gateway, current_reward } => label_llm(traj, trajectory_id, gateway, *current_reward),
        }
    }

    /// Labels every trajectory and writes the indices back into it.
    pub fn label_dataset(&self, dataset: &mut TrajectoryDataset) -> Result<Vec<LabelingResult>, LabelError> {
        let mut out = Vec::with_capacity(dataset.len());
        for (i, t) in dataset.trajectories.iter_mut().enumerate() {
            let r = self.label(t, i)?;
            t.goal_indices = r.goal_indices.clone();
            out.push(r);
        }
        Ok(out)
    }
}

/// S_g from the labeled goal states of `dplus`; S_ng from every other state
/// of `dplus` and all of `dminus`. Goal labels win on duplicate states.
pub fn build_labeled_sets(
    dplus: &TrajectoryDataset,
    dminus: &TrajectoryDataset,
    labels: &[LabelingResult],
) -> Result<LabeledStateSets, LabelError> {
    let mut sets = LabeledStateSets::new();
    let mut goal_indices: Vec<Option<&[usize]>> = vec![None; dplus.len()];
    for l in labels {
        if let Some(slot) = goal_indices.get_mut(l.trajectory_id) {
            *slot = Some(&l.goal_indices);
        }
    }
    for (i, t) in dplus.trajectories.iter().enumerate() {
        let goals = goal_indices[i].ok_or(LabelError::Missing(i))?;
        for &g in goals {
            if g == 0 || g > t.len() {
                return Err(LabelError::OutOfRange {
                    trajectory: i,
                    index: g as i64,
                    len: t.len(),
                });
            }
            sets.insert_goal(t.steps[g - 1].state.clone());
        }
    }
    for s in dplus.states().chain(dminus.states()) {
        sets.insert_nongoal(s.clone());
    }
    if sets.goal_len() == 0 {
        return Err(LabelError::NoGoalStates);
    }
    Ok(sets)
}

/// Sets from the `goal_indices` already stored on the trajectories.
pub fn sets_from_labels(dplus: &TrajectoryDataset, dminus: &TrajectoryDataset) -> LabeledStateSets {
    let mut sets = LabeledStateSets::new();
    for t in &dplus.trajectories {
        for &g in &t.goal_indices {
            if let Some(step) = g.checked_sub(1).and_then(|i| t.steps.get(i)) {
                sets.insert_goal(step.state.clone());
            }
        }
    }
    for s in dplus.states().chain(dminus.states()) {
        sets.insert_nongoal(s.clone());
    }
    sets
}

/// The stored labels of a dataset as labeling results.
pub fn stored_labels(dataset: &TrajectoryDataset) -> Vec<LabelingResult> {
    dataset
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| LabelingResult {
            trajectory_id: i,
            goal_indices: t.goal_indices.clone(),
            reasoning: String::new(),
        })
        .collect()
}
