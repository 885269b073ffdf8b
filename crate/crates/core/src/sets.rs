//! The goal / non-goal state partition.

use indexmap::IndexMap;

use crate::state::{GridState, StateKey};

/// Disjoint goal and non-goal states, deduplicated by [`StateKey`].
///
/// A state offered to both sides stays on the goal side. Insertion order is
/// preserved, so iteration is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledStateSets {
    goal: IndexMap<StateKey, GridState>,
    nongoal: IndexMap<StateKey, GridState>,
}

impl LabeledStateSets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_goal(&mut self, state: GridState) {
        let key = state.key();
        self.nongoal.shift_remove(&key);
        self.goal.entry(key).or_insert(state);
    }

    pub fn insert_nongoal(&mut self, state: GridState) {
        let key = state.key();
        if !self.goal.contains_key(&key) {
            self.nongoal.entry(key).or_insert(state);
        }
    }

    pub fn goal_states(&self) -> impl ExactSizeIterator<Item = &GridState> {
        self.goal.values()
    }

    pub fn nongoal_states(&self) -> impl ExactSizeIterator<Item = &GridState> {
        self.nongoal.values()
    }

    pub fn goal_len(&self) -> usize {
        self.goal.len()
    }

    pub fn nongoal_len(&self) -> usize {
        self.nongoal.len()
    }

    pub fn is_goal(&self, state: &GridState) -> bool {
        self.goal.contains_key(&state.key())
    }

    pub fn contains(&self, state: &GridState) -> bool {
        let key = state.key();
        self.goal.contains_key(&key) || self.nongoal.contains_key(&key)
    }

    /// Adds every state of `other`, keeping goal precedence.
    pub fn union(&mut self, other: &LabeledStateSets) {
        for s in other.goal_states() {
            self.insert_goal(s.clone());
        }
        for s in other.nongoal_states() {
            self.insert_nongoal(s.clone());
        }
    }
}
