//! Mutation operators: feedback assembly plus LLM and rule-based rewriting.

mod llm;
mod rule;
mod shaping;
pub mod templates;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use llm::{init_program_llm, mutate_llm};
pub use rule::{apply_edit, init_program_rule_based, mutate_rule_based, Edit};
pub use shaping::{main_condition, shaping_edit};

use crate::dsl::{DslError, RewardProgram};
use crate::fitness::FitnessReport;
use crate::llm::{LlmError, LlmGateway};
use crate::sets::LabeledStateSets;
use crate::state::GridState;
use crate::trajectory::{Provenance, Trajectory, TrajectoryDataset};

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("the program has no misclassified states to fix")]
    NothingToFix,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("response unusable after retry: {0}")]
    Unparseable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationMode {
    ClassifyFix,
    ShapingFix,
}

/// A state shown to the mutator, with the value and trace the parent
/// program produced on it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackState {
    pub state: GridState,
    pub value: f64,
    pub debug_trace: Vec<String>,
    pub is_goal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationContext {
    pub parent: RewardProgram,
    pub feedback_states: Vec<FeedbackState>,
    pub paired_expert_state: Option<GridState>,
    pub expert_trajectory: Option<Trajectory>,
    /// Shaping mode: demonstrations and failed learner attempts.
    pub expert_trajectories: Vec<Trajectory>,
    pub failed_trajectories: Vec<Trajectory>,
    pub mode: MutationMode,
    pub rng_seed: u64,
}

impl MutationContext {
    pub fn source(&self) -> &str {
        &self.parent.source
    }

    /// Every state the context exposes, for vocabulary extraction.
    pub fn states(&self) -> impl Iterator<Item = &GridState> {
        self.feedback_states
            .iter()
            .map(|f| &f.state)
            .chain(self.paired_expert_state.iter())
            .chain(self.expert_trajectory.iter().flat_map(|t| t.states()))
            .chain(self.expert_trajectories.iter().flat_map(|t| t.states()))
    }
}

/// Gate probabilities applied in order; an earlier gate wins a conflict.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    /// Attach one full demonstration.
    pub p_expert_trajectory: f64,
    /// Show misclassified states only, without a contrasting goal state.
    pub p_incorrect_only: f64,
    /// Keep only the goal-side mistakes when both kinds exist.
    pub p_expert_only: f64,
    pub max_feedback_states: usize,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            p_expert_trajectory: 0.25,
            p_incorrect_only: 0.5,
            p_expert_only: 0.75,
            max_feedback_states: 3,
        }
    }
}

fn demonstrations(dplus: &TrajectoryDataset) -> Vec<&Trajectory> {
    let experts: Vec<&Trajectory> = dplus
        .trajectories
        .iter()
        .filter(|t| t.provenance == Provenance::Expert)
        .collect();
    if experts.is_empty() {
        dplus.trajectories.iter().collect()
    } else {
        experts
    }
}

/// Feedback for a classification fix, composed by the configured gates.
pub fn build_context(
    parent: &RewardProgram,
    report: &FitnessReport,
    sets: &LabeledStateSets,
    dplus: &TrajectoryDataset,
    config: &FeedbackConfig,
    rng: &mut impl Rng,
) -> Result<MutationContext, MutationError> {
    if report.is_perfect() {
        return Err(MutationError::NothingToFix);
    }
    let rng_seed = rng.gen();
    let attach_trajectory = rng.gen_bool(config.p_expert_trajectory);
    let incorrect_only = rng.gen_bool(config.p_incorrect_only);
    let expert_only = rng.gen_bool(config.p_expert_only);

    let both = !report.false_negatives.is_empty() && !report.false_positives.is_empty();
    let pool: Vec<FeedbackState> = report
        .false_negatives
        .iter()
        .map(|m| (m, true))
        .chain(
            report
                .false_positives
                .iter()
                .filter(|_| !(both && expert_only))
                .map(|m| (m, false)),
        )
        .map(|(m, is_goal)| FeedbackState {
            state: m.state.clone(),
            value: m.value,
            debug_trace: m.debug_trace.clone(),
            is_goal,
        })
        .collect();
    let n = config.max_feedback_states.max(1).min(pool.len());
    let chosen = rand::seq::index::sample(rng, pool.len(), n).into_vec();
    let feedback_states: Vec<FeedbackState> = pool
        .into_iter()
        .enumerate()
        .filter(|(i, _)| chosen.contains(i))
        .map(|(_, f)| f)
        .collect();

    let expert_trajectory = if attach_trajectory {
        demonstrations(dplus).choose(rng).map(|t| (*t).clone())
    } else {
        None
    };
    let needs_pair = feedback_states.iter().any(|f| !f.is_goal);
    let paired_expert_state = if needs_pair || !(incorrect_only && !attach_trajectory) {
        sets.goal_states().choose(rng).cloned()
    } else {
        None
    };
    Ok(MutationContext {
        parent: parent.clone(),
        feedback_states,
        paired_expert_state,
        expert_trajectory,
        expert_trajectories: Vec::new(),
        failed_trajectories: Vec::new(),
        mode: MutationMode::ClassifyFix,
        rng_seed,
    })
}

/// Context for a shaping fix: the program separates states but the learner
/// fails, so the mutator sees demonstrations and failed attempts.
pub fn build_shaping_context(
    parent: &RewardProgram,
    dplus: &TrajectoryDataset,
    failed: &TrajectoryDataset,
    rng: &mut impl Rng,
) -> MutationContext {
    let mut experts: Vec<Trajectory> = demonstrations(dplus).into_iter().cloned().collect();
    experts.truncate(4);
    let mut failed: Vec<Trajectory> = failed
        .trajectories
        .iter()
        .filter(|t| !t.states().any(crate::gridworld::success))
        .cloned()
        .collect();
    failed.shuffle(rng);
    failed.truncate(4);
    MutationContext {
        parent: parent.clone(),
        feedback_states: Vec::new(),
        paired_expert_state: None,
        expert_trajectory: None,
        expert_trajectories: experts,
        failed_trajectories: failed,
        mode: MutationMode::ShapingFix,
        rng_seed: rng.gen(),
    }
}

/// The source of offspring programs.
#[derive(Clone, Copy)]
pub enum Mutator<'a> {
    RuleBased,
    Llm(&'a LlmGateway),
}

impl Mutator<'_> {
    pub fn is_llm(&self) -> bool {
        matches!(self, Mutator::Llm(_))
    }

    /// One initial-population member; `index` distinguishes repeated draws.
    pub fn init_program(
        &self,
        sets: &LabeledStateSets,
        index: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<RewardProgram, MutationError> {
        match self {
            Mutator::RuleBased => Ok(init_program_rule_based(sets, rng)),
            Mutator::Llm(g) => init_program_llm(sets, index, g, rng),
        }
    }

    /// An offspring of `ctx.parent`; `donors` supply helpers for grafting.
    pub fn mutate(&self, ctx: &MutationContext, donors: &[&RewardProgram]) -> Result<RewardProgram, MutationError> {
        match self {
            Mutator::RuleBased => {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.rng_seed);
                Ok(mutate_rule_based(ctx, donors, &mut rng))
            }
            Mutator::Llm(g) => mutate_llm(ctx, g),
        }
    }
}

pub(crate) fn reparse(program: crate::dsl::Program, generation: usize) -> Result<RewardProgram, DslError> {
    RewardProgram::from_ast(program, generation)
}
