//! The declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::fitness::DEFAULT_TAU;
use crate::llm::{mode_from_env, CacheMode, GatewayConfig, LlmGateway, TranscriptCache};
use crate::mutation::FeedbackConfig;
use crate::rl::RlConfig;
use crate::search::SearchConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub data: DataConfig,
    pub labeler: LabelerConfig,
    pub search: SearchSection,
    pub rl: RlSection,
    pub llm: LlmSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub task: String,
    pub grid_size: usize,
    pub max_steps: usize,
    pub n_expert_train: usize,
    pub n_negative_train: usize,
    pub n_expert_test: usize,
    pub n_negative_test: usize,
    pub seed: u64,
    /// Existing JSONL dataset to split instead of generating one.
    pub dataset: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            task: "GoToObj".into(),
            grid_size: 6,
            max_steps: 100,
            n_expert_train: 8,
            n_negative_train: 8,
            n_expert_test: 50,
            n_negative_test: 50,
            seed: 0,
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelerKind {
    #[default]
    Oracle,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutatorKind {
    #[default]
    Rule,
    Llm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerConfig {
    pub kind: LabelerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub mutator: MutatorKind,
    pub population_size: usize,
    pub elite_count: usize,
    pub mutation_steps: usize,
    pub generations: usize,
    pub tau: f64,
    pub seed: u64,
    pub p_expert_trajectory: f64,
    pub p_incorrect_only: f64,
    pub p_expert_only: f64,
    pub max_feedback_states: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        SearchSection {
            mutator: MutatorKind::Rule,
            population_size: s.population_size,
            elite_count: s.elite_count,
            mutation_steps: s.mutation_steps,
            generations: s.generations,
            tau: DEFAULT_TAU,
            seed: 0,
            p_expert_trajectory: s.feedback.p_expert_trajectory,
            p_incorrect_only: s.feedback.p_incorrect_only,
            p_expert_only: s.feedback.p_expert_only,
            max_feedback_states: s.feedback.max_feedback_states,
        }
    }
}

impl SearchSection {
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            population_size: self.population_size,
            elite_count: self.elite_count,
            mutation_steps: self.mutation_steps,
            generations: self.generations,
            tau: self.tau,
            rng_seed: self.seed,
            feedback: FeedbackConfig {
                p_expert_trajectory: self.p_expert_trajectory,
                p_incorrect_only: self.p_incorrect_only,
                p_expert_only: self.p_expert_only,
                max_feedback_states: self.max_feedback_states,
            },
            init_retries: SearchConfig::default().init_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlSection {
    /// Environment steps per policy-training phase; 0 disables the phase.
    pub budget: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub envs_per_batch: usize,
    pub steps_per_env: usize,
    pub entropy_coef: f64,
    pub seed: u64,
    pub eval_episodes: usize,
    /// Training fitness at which the policy phase runs.
    pub trigger_fitness: f64,
    /// Stop the loop once greedy success reaches this.
    pub success_threshold: f64,
    /// Request shaping when fitness is at least this ...
    pub shaping_fitness: f64,
    /// ... and success stays below this.
    pub shaping_success: f64,
    /// Learner trajectories (the most recent) labeled and merged per phase.
    pub expand_trajectories: usize,
    /// Continue from the previous phase's policy.
    pub warm_start: bool,
}

impl Default for RlSection {
    fn default() -> Self {
        let r = RlConfig::default();
        RlSection {
            budget: r.budget,
            gamma: r.gamma,
            learning_rate: r.learning_rate,
            clip: r.clip,
            epochs: r.epochs,
            minibatches: r.minibatches,
            envs_per_batch: r.envs_per_batch,
            steps_per_env: r.steps_per_env,
            entropy_coef: r.entropy_coef,
            seed: 0,
            eval_episodes: 100,
            trigger_fitness: 1.0,
            success_threshold: 0.9,
            shaping_fitness: 0.99,
            shaping_success: 0.5,
            expand_trajectories: 32,
            warm_start: true,
        }
    }
}

impl RlSection {
    pub fn rl_config(&self) -> RlConfig {
        RlConfig {
            budget: self.budget,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            clip: self.clip,
            epochs: self.epochs,
            minibatches: self.minibatches,
            envs_per_batch: self.envs_per_batch,
            steps_per_env: self.steps_per_env,
            entropy_coef: self.entropy_coef,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// Transcript cache file; required for record and replay.
    pub cache: Option<PathBuf>,
    /// record, replay or live; `EVOREWARD_LLM_MODE` takes precedence.
    pub mode: Option<String>,
    /// Model name; `EVOREWARD_LLM_MODEL` takes precedence.
    pub model: Option<String>,
}

impl LoopConfig {
    pub fn load(path: &Path) -> anyhow::Result<LoopConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: LoopConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.search.search_config().validate()?;
        if self.rl.budget > 0 {
            self.rl.rl_config().validate()?;
        }
        if self.data.n_expert_train == 0 {
            bail!("data.n_expert_train must be at least 1");
        }
        Ok(())
    }

    /// Whether any phase talks to a model.
    pub fn needs_llm(&self) -> bool {
        self.search.mutator == MutatorKind::Llm || self.labeler.kind == LabelerKind::Llm
    }

    /// Gateway from this section plus the environment.
    pub fn gateway(&self) -> anyhow::Result<LlmGateway> {
        let mode = match mode_from_env().map_err(anyhow::Error::msg)? {
            Some(m) => m,
            None => match &self.llm.mode {
                Some(m) => m.parse().map_err(anyhow::Error::msg)?,
                None => CacheMode::Live,
            },
        };
        let mut gc = GatewayConfig::from_env();
        if std::env::var(crate::llm::ENV_MODEL).map_or(true, |m| m.is_empty()) {
            if let Some(m) = &self.llm.model {
                gc.model = m.clone();
            }
        }
        let cache = match (&self.llm.cache, mode) {
            (Some(path), _) => TranscriptCache::open(path, mode)?,
            (None, CacheMode::Live) => TranscriptCache::in_memory(mode),
            (None, _) => bail!("llm.cache is required in {mode:?} mode"),
        };
        Ok(LlmGateway::new(gc, cache))
    }
}
