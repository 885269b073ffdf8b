//! Thresholded fitness of a reward program against labeled states.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{EvalResult, RewardProgram};
use crate::sets::LabeledStateSets;
use crate::state::GridState;
use crate::trajectory::{Provenance, TrajectoryDataset};

pub const DEFAULT_TAU: f64 = 50.0;
const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FitnessError {
    #[error("no goal states: fitness is undefined")]
    NoGoalStates,
    #[error("no non-goal states: fitness is undefined")]
    NoNongoalStates,
    #[error("trajectory {0} of the demonstrations has no goal labels")]
    Unlabeled(usize),
}

/// A misclassified state with the value and trace that flagged it.
#[derive(Debug, Clone, PartialEq)]
pub struct Misclassified {
    pub state: GridState,
    pub value: f64,
    pub debug_trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    pub fitness: f64,
    pub tau: f64,
    /// Goal states scored below `tau`, most confidently wrong first.
    pub false_negatives: Vec<Misclassified>,
    /// Non-goal states scored at or above `tau`, most confidently wrong first.
    pub false_positives: Vec<Misclassified>,
    pub eval_errors: usize,
    pub goal_count: usize,
    pub nongoal_count: usize,
}

impl FitnessReport {
    pub fn is_perfect(&self) -> bool {
        self.false_negatives.is_empty() && self.false_positives.is_empty()
    }

    pub fn misclassified(&self) -> usize {
        self.false_negatives.len() + self.false_positives.len()
    }
}

fn evaluate_all(program: &RewardProgram, states: &[&GridState]) -> Vec<EvalResult> {
    if states.len() >= 64 {
        states.par_iter().map(|s| program.evaluate(s)).collect()
    } else {
        states.iter().map(|s| program.evaluate(s)).collect()
    }
}

fn sort_by_confidence(list: &mut [Misclassified], tau: f64) {
    list.sort_by(|a, b| {
        (b.value - tau)
            .abs()
            .total_cmp(&(a.value - tau).abs())
            .then_with(|| a.state.key().cmp(&b.state.key()))
    });
}

pub fn compute_fitness(program: &RewardProgram, sets: &LabeledStateSets, tau: f64) -> Result<FitnessReport, FitnessError> {
    if sets.goal_len() == 0 {
        return Err(FitnessError::NoGoalStates);
    }
    if sets.nongoal_len() == 0 {
        return Err(FitnessError::NoNongoalStates);
    }
    let goal: Vec<&GridState> = sets.goal_states().collect();
    let nongoal: Vec<&GridState> = sets.nongoal_states().collect();
    let mut eval_errors = 0;
    let mut false_negatives = Vec::new();
    let mut false_positives = Vec::new();
    for (states, is_goal) in [(&goal, true), (&nongoal, false)] {
        for (s, r) in states.iter().zip(evaluate_all(program, states)) {
            eval_errors += r.value.is_err() as usize;
            let value = r.reward();
            if (value >= tau) != is_goal {
                let m = Misclassified {
                    state: (*s).clone(),
                    value,
                    debug_trace: r.debug_trace,
                };
                if is_goal {
                    false_negatives.push(m);
                } else {
                    false_positives.push(m);
                }
            }
        }
    }
    sort_by_confidence(&mut false_negatives, tau);
    sort_by_confidence(&mut false_positives, tau);
    let hit_goal = goal.len() - false_negatives.len();
    let fitness = hit_goal as f64 / goal.len() as f64 - false_positives.len() as f64 / nongoal.len() as f64;
    Ok(FitnessReport {
        fitness,
        tau,
        false_negatives,
        false_positives,
        eval_errors,
        goal_count: goal.len(),
        nongoal_count: nongoal.len(),
    })
}

/// Both sides of the masked-return identity, computed independently.
///
/// The left side is [`compute_fitness`] on sets built from the labels. The
/// right side walks the distinct states of both datasets, masks each with
/// +1 if it is labeled a goal in `dplus` and -1 otherwise, and takes
/// `J(expert, m*b) - J(others, -m*b)` where `b` is the binarized reward and
/// `J` averages over the states the mask selects.
pub fn masked_return_sides(
    program: &RewardProgram,
    dplus: &TrajectoryDataset,
    dminus: &TrajectoryDataset,
    tau: f64,
) -> Result<(f64, f64), FitnessError> {
    for (i, t) in dplus.trajectories.iter().enumerate() {
        if t.goal_indices.is_empty() && t.provenance == Provenance::Expert {
            return Err(FitnessError::Unlabeled(i));
        }
    }
    let sets = crate::labeler::sets_from_labels(dplus, dminus);
    let left = compute_fitness(program, &sets, tau)?.fitness;

    let mut goal_keys = HashSet::new();
    for t in &dplus.trajectories {
        for &g in &t.goal_indices {
            goal_keys.insert(t.steps[g - 1].state.key());
        }
    }
    let mut seen = HashSet::new();
    let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0usize, 0.0, 0usize);
    for s in dplus.states().chain(dminus.states()) {
        let key = s.key();
        if !seen.insert(key.clone()) {
            continue;
        }
        let mask = if goal_keys.contains(&key) { 1.0 } else { -1.0 };
        let b = if program.evaluate(s).reward() >= tau { 1.0 } else { 0.0 };
        if mask > 0.0 {
            pos_sum += mask * b;
            pos_n += 1;
        } else {
            neg_sum += -mask * b;
            neg_n += 1;
        }
    }
    if pos_n == 0 {
        return Err(FitnessError::NoGoalStates);
    }
    if neg_n == 0 {
        return Err(FitnessError::NoNongoalStates);
    }
    let right = pos_sum / pos_n as f64 - neg_sum / neg_n as f64;
    Ok((left, right))
}

pub fn masked_return_identity_check(
    program: &RewardProgram,
    dplus: &TrajectoryDataset,
    dminus: &TrajectoryDataset,
    tau: f64,
) -> Result<bool, FitnessError> {
    let (left, right) = masked_return_sides(program, dplus, dminus, tau)?;
    Ok((left - right).abs() <= IDENTITY_TOLERANCE)
}
