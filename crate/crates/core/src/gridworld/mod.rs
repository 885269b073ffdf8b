//! Deterministic BabyAI-style gridworld.
//!
//! Transitions follow MiniGrid semantics on a fully observable grid. Tasks
//! are looked up by level name in [`TaskKind`]; their success predicates read
//! the target out of the state's instruction, so the same predicate code
//! serves single-task and multi-task environments.

mod bot;
mod tasks;

pub use bot::{expert_actions, SolveError};
pub use tasks::{divider_column, success, Goal, TaskKind, TASK_IDS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{door, Cell, GridState, ObjectKind};
use crate::trajectory::{Provenance, Step, Trajectory, TrajectoryDataset};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("unknown task id {0:?}")]
    UnknownTask(String),
    #[error("grid_size must be at least 5, got {0}")]
    GridTooSmall(usize),
    #[error("max_steps must be at least 1")]
    NoSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Action {
    Left = 0,
    Right = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
    /// Recorded on the terminal step of a trajectory; a no-op in `step`.
    Done = 6,
}

impl Action {
    /// The actions a policy chooses among.
    pub const MOVES: [Action; 6] = [
        Action::Left,
        Action::Right,
        Action::Forward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
    ];

    pub fn from_id(id: u8) -> Option<Action> {
        match id {
            0 => Some(Action::Left),
            1 => Some(Action::Right),
            2 => Some(Action::Forward),
            3 => Some(Action::Pickup),
            4 => Some(Action::Drop),
            5 => Some(Action::Toggle),
            6 => Some(Action::Done),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub task_id: String,
    pub grid_size: usize,
    /// Horizon: the maximum number of states in one episode.
    pub max_steps: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(task_id: impl Into<String>, grid_size: usize) -> Self {
        EnvConfig {
            task_id: task_id.into(),
            grid_size,
            max_steps: 100,
            seed: 0,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Applies one action with MiniGrid semantics. Invalid or blocked actions
/// leave the state unchanged; `step_index` is not touched.
pub fn transition(state: &GridState, action: Action) -> GridState {
    let mut next = state.clone();
    let agent = state.agent_pos();
    let dir = state.agent_dir();
    let front = agent.step(dir);
    let agent_cell = state.get(agent).expect("agent on grid");
    match action {
        Action::Left | Action::Right => {
            let nd = if action == Action::Left { dir.left() } else { dir.right() };
            next.set(agent, Cell { extra: nd.code(), ..agent_cell });
        }
        Action::Forward => {
            if let Some(target) = state.get(front) {
                if target.is_passable() {
                    next.set(agent, state.under_agent);
                    next.under_agent = target;
                    next.set(front, agent_cell);
                }
            }
        }
        Action::Pickup => {
            if let Some(target) = state.get(front) {
                if state.carrying.is_none() && target.object.is_carryable() {
                    next.carrying = Some((target.object, target.color));
                    next.set(front, Cell::EMPTY);
                }
            }
        }
        Action::Drop => {
            if let (Some((object, color)), Some(target)) = (state.carrying, state.get(front)) {
                if target.object == ObjectKind::Empty {
                    next.set(front, Cell::object(object, color));
                    next.carrying = None;
                }
            }
        }
        Action::Toggle => {
            if let Some(target) = state.get(front) {
                if target.object == ObjectKind::Door {
                    let extra = match target.extra {
                        door::LOCKED => {
                            if state.carrying == Some((ObjectKind::Key, target.color)) {
                                door::OPEN
                            } else {
                                door::LOCKED
                            }
                        }
                        door::CLOSED => door::OPEN,
                        _ => door::CLOSED,
                    };
                    next.set(front, Cell { extra, ..target });
                }
            }
        }
        Action::Done => {}
    }
    next
}

/// A task environment: configuration plus the resolved task.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: EnvConfig,
    pub task: TaskKind,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Env, EnvError> {
        if config.grid_size < 5 {
            return Err(EnvError::GridTooSmall(config.grid_size));
        }
        if config.max_steps < 1 {
            return Err(EnvError::NoSteps);
        }
        let task = TaskKind::from_id(&config.task_id)?;
        Ok(Env { config, task })
    }

    fn episode_rng(&self, episode_seed: u64) -> ChaCha8Rng {
        let mixed = self
            .config
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ episode_seed;
        ChaCha8Rng::seed_from_u64(mixed)
    }

    pub fn reset(&self, episode_seed: u64) -> GridState {
        let mut rng = self.episode_rng(episode_seed);
        loop {
            let state = self.task.generate(self.config.grid_size, &mut rng);
            if !self.success(&state) {
                return state;
            }
        }
    }

    pub fn success(&self, state: &GridState) -> bool {
        tasks::success(state)
    }

    /// One environment step. `done` is set on success, on an ordering
    /// violation, or when the next state is the last one the horizon allows.
    pub fn step(&self, state: &GridState, action: Action) -> (GridState, bool) {
        let mut next = transition(state, action);
        next.step_index = state.step_index + 1;
        let done = self.success(&next)
            || tasks::violates_order(state, &next)
            || next.step_index + 1 >= self.config.max_steps;
        (next, done)
    }

    fn record(&self, states: Vec<GridState>, actions: Vec<Action>, provenance: Provenance) -> Trajectory {
        let instruction = states[0].instruction.clone();
        let steps = states
            .into_iter()
            .enumerate()
            .map(|(i, state)| Step {
                state,
                action: actions.get(i).copied().unwrap_or(Action::Done).id(),
            })
            .collect();
        Trajectory {
            task_id: self.config.task_id.clone(),
            instruction,
            steps,
            provenance,
            goal_indices: Vec::new(),
        }
    }

    /// Runs `actions` from `start`, stopping early when the episode ends.
    pub fn rollout_actions(&self, start: GridState, actions: &[Action], provenance: Provenance) -> Trajectory {
        let mut states = vec![start];
        let mut taken = Vec::new();
        let mut done = states[0].step_index + 1 >= self.config.max_steps;
        for &a in actions {
            if done {
                break;
            }
            let (next, d) = self.step(states.last().unwrap(), a);
            taken.push(a);
            states.push(next);
            done = d;
        }
        self.record(states, taken, provenance)
    }

    pub fn expert_rollout(&self, episode_seed: u64) -> Result<Trajectory, SolveError> {
        let start = self.reset(episode_seed);
        let actions = expert_actions(&start)?;
        if actions.len() + 1 > self.config.max_steps {
            return Err(SolveError::HorizonExceeded {
                needed: actions.len() + 1,
                horizon: self.config.max_steps,
            });
        }
        let traj = self.rollout_actions(start, &actions, Provenance::Expert);
        if !self.success(traj.final_state()) {
            return Err(SolveError::NotSolved);
        }
        Ok(traj)
    }

    /// `n_expert` demonstrations and `n_random` random rollouts that never
    /// reach success. Episode seeds count up from `seed`; unsolvable or
    /// accidentally successful episodes are skipped.
    pub fn generate_dataset(&self, n_expert: usize, n_random: usize, seed: u64) -> TrajectoryDataset {
        let mut out = Vec::with_capacity(n_expert + n_random);
        let mut episode = seed;
        while out.len() < n_expert {
            if let Ok(t) = self.expert_rollout(episode) {
                out.push(t);
            }
            episode += 1;
        }
        let mut episode = seed.wrapping_add(1 << 32);
        while out.len() < n_expert + n_random {
            let t = self.random_rollout(episode);
            if !t.states().any(|s| self.success(s)) {
                out.push(t);
            }
            episode += 1;
        }
        TrajectoryDataset::new(out)
    }

    pub fn random_rollout(&self, episode_seed: u64) -> Trajectory {
        let start = self.reset(episode_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed ^ 0xA5A5_5A5A_DEAD_BEEF);
        let actions: Vec<Action> = (0..self.config.max_steps)
            .map(|_| Action::MOVES[rng.gen_range(0..Action::MOVES.len())])
            .collect();
        self.rollout_actions(start, &actions, Provenance::Random)
    }
}
