//! Policy learning against a reward program, and the data it feeds back.

pub mod features;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{RewardProgram, MAX_REWARD};
use crate::gridworld::{Action, Env};
use crate::labeler::{LabelError, Labeler};
use crate::sets::LabeledStateSets;
use crate::state::GridState;
use crate::trajectory::{Provenance, Step, Trajectory, TrajectoryDataset};
use features::{active_features, DIM};

const ACTIONS: usize = Action::MOVES.len();

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid RL config: {0}")]
    Config(String),
    #[error("evaluation needs at least one episode")]
    NoEpisodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    /// Environment steps for one call to `train_policy`.
    pub budget: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub envs_per_batch: usize,
    pub steps_per_env: usize,
    pub entropy_coef: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            budget: 200_000,
            gamma: 0.99,
            learning_rate: 0.05,
            clip: 0.2,
            epochs: 2,
            minibatches: 4,
            envs_per_batch: 16,
            steps_per_env: 128,
            entropy_coef: 0.01,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let fail = |m: &str| Err(RlError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if self.envs_per_batch == 0 || self.steps_per_env == 0 || self.epochs == 0 || self.minibatches == 0 {
            return fail("batch shape entries must be positive");
        }
        if !(self.learning_rate > 0.0 && self.clip > 0.0) {
            return fail("learning_rate and clip must be positive");
        }
        Ok(())
    }
}

/// Linear softmax policy with a linear value baseline over sparse binary
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// `ACTIONS x DIM`, row-major.
    pub weights: Vec<f64>,
    pub value: Vec<f64>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            weights: vec![0.0; ACTIONS * DIM],
            value: vec![0.0; DIM],
        }
    }
}

impl PolicyParams {
    fn logits(&self, feats: &[usize]) -> [f64; ACTIONS] {
        let mut z = [0.0; ACTIONS];
        for (a, za) in z.iter_mut().enumerate() {
            *za = feats.iter().map(|&f| self.weights[a * DIM + f]).sum();
        }
        z
    }

    /// Action probabilities in `s`.
    pub fn probabilities(&self, s: &GridState) -> [f64; ACTIONS] {
        softmax(self.logits(&active_features(s)))
    }

    pub fn state_value(&self, s: &GridState) -> f64 {
        active_features(s).iter().map(|&f| self.value[f]).sum()
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy(&self, s: &GridState) -> Action {
        let z = self.logits(&active_features(s));
        let mut best = 0;
        for a in 1..ACTIONS {
            if z[a] > z[best] {
                best = a;
            }
        }
        Action::MOVES[best]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.value).all(|w| w.is_finite())
    }
}

fn softmax(z: [f64; ACTIONS]) -> [f64; ACTIONS] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = z.map(|v| (v - m).exp());
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

fn sample(p: &[f64; ACTIONS], rng: &mut impl Rng) -> usize {
    let mut u: f64 = rng.gen();
    for (a, &pa) in p.iter().enumerate() {
        if u < pa {
            return a;
        }
        u -= pa;
    }
    ACTIONS - 1
}

/// Step reward: the program's value scaled into [0, 1]; failures give 0.
fn step_reward(reward: &RewardProgram, s: &GridState, errors: &mut usize) -> f64 {
    let r = reward.evaluate(s);
    if r.value.is_err() {
        *errors += 1;
    }
    r.reward() / MAX_REWARD
}

struct Sample {
    feats: Vec<usize>,
    action: usize,
    logp: f64,
    ret: f64,
    adv: f64,
}

struct Rollout {
    samples: Vec<Sample>,
    trajectories: Vec<Trajectory>,
    steps: usize,
    errors: usize,
    successes: usize,
    episodes: usize,
}

fn finish(env: &Env, states: Vec<GridState>, actions: Vec<usize>) -> Trajectory {
    let instruction = states[0].instruction.clone();
    let steps = states
        .into_iter()
        .enumerate()
        .map(|(i, state)| Step {
            state,
            action: actions.get(i).map_or(Action::Done.id(), |&a| Action::MOVES[a].id()),
        })
        .collect();
    Trajectory {
        task_id: env.config.task_id.clone(),
        instruction,
        steps,
        provenance: Provenance::Learner,
        goal_indices: Vec::new(),
    }
}

/// Runs the stochastic policy for `steps` environment steps, resetting on
/// episode end; a cut-off episode is bootstrapped from the value baseline.
fn collect(
    env: &Env,
    policy: &PolicyParams,
    reward: &RewardProgram,
    config: &RlConfig,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Rollout {
    let mut out = Rollout {
        samples: Vec::new(),
        trajectories: Vec::new(),
        steps: 0,
        errors: 0,
        successes: 0,
        episodes: 0,
    };
    while out.steps < steps {
        let mut s = env.reset(rng.gen());
        let mut states = vec![s.clone()];
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut feats = Vec::new();
        let mut logps = Vec::new();
        let mut done = false;
        while !done && out.steps < steps {
            let f = active_features(&s);
            let p = softmax(policy.logits(&f));
            let a = sample(&p, rng);
            let (next, d) = env.step(&s, Action::MOVES[a]);
            rewards.push(step_reward(reward, &next, &mut out.errors));
            feats.push(f);
            logps.push(p[a].ln());
            actions.push(a);
            states.push(next.clone());
            s = next;
            done = d;
            out.steps += 1;
        }
        let mut g = if done { 0.0 } else { policy.state_value(&s) };
        let mut rets = vec![0.0; rewards.len()];
        for t in (0..rewards.len()).rev() {
            g = rewards[t] + config.gamma * g;
            rets[t] = g;
        }
        for (((f, a), logp), ret) in feats.into_iter().zip(actions.iter().copied()).zip(logps).zip(rets) {
            let v: f64 = f.iter().map(|&i| policy.value[i]).sum();
            out.samples.push(Sample {
                feats: f,
                action: a,
                logp,
                ret,
                adv: ret - v,
            });
        }
        if done {
            out.episodes += 1;
            out.successes += env.success(&s) as usize;
        }
        out.trajectories.push(finish(env, states, actions));
    }
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascends along `grad`.
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            if grad[i] == 0.0 && self.m[i] == 0.0 {
                continue;
            }
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// What training produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub trajectories: TrajectoryDataset,
    pub env_steps: usize,
    pub reward_errors: usize,
    /// Success rate of finished training episodes, per batch.
    pub batch_success: Vec<f64>,
}

/// Clipped policy-gradient training from `init` (zeros when `None`).
/// Uses at most `config.budget` environment steps; deterministic in `seed`.
pub fn train_policy(
    env: &Env,
    reward: &RewardProgram,
    config: &RlConfig,
    seed: u64,
    init: Option<&PolicyParams>,
) -> Result<TrainOutcome, RlError> {
    config.validate()?;
    let mut policy = init.cloned().unwrap_or_default();
    let mut adam_pi = Adam::new(policy.weights.len());
    let mut adam_v = Adam::new(policy.value.len());
    let mut trajectories = Vec::new();
    let mut used = 0;
    let mut errors = 0;
    let mut batch_success = Vec::new();
    let mut batch = 0u64;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    while used < config.budget {
        let remaining = config.budget - used;
        let per_env = config.steps_per_env.min(remaining.div_ceil(config.envs_per_batch));
        let quotas: Vec<usize> = (0..config.envs_per_batch)
            .map(|i| per_env.min(remaining.saturating_sub(i * per_env)))
            .filter(|&q| q > 0)
            .collect();
        let rollouts: Vec<Rollout> = quotas
            .par_iter()
            .enumerate()
            .map(|(i, &q)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(batch * config.envs_per_batch as u64 + i as u64);
                collect(env, &policy, reward, config, q, &mut rng)
            })
            .collect();
        batch += 1;
        let mut samples = Vec::new();
        let (mut eps, mut wins) = (0, 0);
        for r in rollouts {
            used += r.steps;
            errors += r.errors;
            eps += r.episodes;
            wins += r.successes;
            samples.extend(r.samples);
            trajectories.extend(r.trajectories);
        }
        batch_success.push(if eps == 0 { 0.0 } else { wins as f64 / eps as f64 });
        update(&mut policy, &mut adam_pi, &mut adam_v, &mut samples, config, &mut shuffle_rng);
    }
    Ok(TrainOutcome {
        policy,
        trajectories: TrajectoryDataset::new(trajectories),
        env_steps: used,
        reward_errors: errors,
        batch_success,
    })
}

fn update(
    policy: &mut PolicyParams,
    adam_pi: &mut Adam,
    adam_v: &mut Adam,
    samples: &mut [Sample],
    config: &RlConfig,
    rng: &mut ChaCha8Rng,
) {
    if samples.is_empty() {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.adv).sum::<f64>() / n;
    let std = (samples.iter().map(|s| (s.adv - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-8);
    for s in samples.iter_mut() {
        s.adv = (s.adv - mean) / std;
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..config.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        let size = order.len().div_ceil(config.minibatches);
        for chunk in order.chunks(size) {
            let mut g_pi = vec![0.0; policy.weights.len()];
            let mut g_v = vec![0.0; policy.value.len()];
            let m = chunk.len() as f64;
            for &i in chunk {
                let s = &samples[i];
                let p = softmax(policy.logits(&s.feats));
                let ratio = (p[s.action].ln() - s.logp).exp();
                let clipped = (s.adv > 0.0 && ratio > 1.0 + config.clip) || (s.adv < 0.0 && ratio < 1.0 - config.clip);
                let entropy: f64 = -p.iter().map(|&q| if q > 0.0 { q * q.ln() } else { 0.0 }).sum::<f64>();
                for a in 0..ACTIONS {
                    let mut g = 0.0;
                    if !clipped {
                        let onehot = (a == s.action) as u8 as f64;
                        g += ratio * s.adv * (onehot - p[a]);
                    }
                    if p[a] > 0.0 {
                        g -= config.entropy_coef * p[a] * (p[a].ln() + entropy);
                    }
                    for &f in &s.feats {
                        g_pi[a * DIM + f] += g / m;
                    }
                }
                let v: f64 = s.feats.iter().map(|&f| policy.value[f]).sum();
                for &f in &s.feats {
                    g_v[f] += (s.ret - v) / m;
                }
            }
            adam_pi.step(&mut policy.weights, &g_pi, config.learning_rate);
            adam_v.step(&mut policy.value, &g_v, config.learning_rate);
        }
    }
}

/// Greedy success rate over `episodes` fresh episodes.
pub fn eval_success(policy: &PolicyParams, env: &Env, episodes: usize, seed: u64) -> Result<f64, RlError> {
    if episodes == 0 {
        return Err(RlError::NoEpisodes);
    }
    let wins: usize = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = env.reset(seed.wrapping_mul(1_000_003).wrapping_add(i) ^ (1 << 48));
            loop {
                if env.success(&s) {
                    return 1;
                }
                let (next, done) = env.step(&s, policy.greedy(&s));
                if done {
                    return env.success(&next) as usize;
                }
                s = next;
            }
        })
        .sum();
    Ok(wins as f64 / episodes as f64)
}

/// Labels learner trajectories and merges their states into `sets`, goal
/// labels taking precedence. Returns the number of new states.
pub fn data_expand(
    learner: &mut TrajectoryDataset,
    labeler: &Labeler<'_>,
    sets: &mut LabeledStateSets,
) -> Result<usize, LabelError> {
    let before = sets.goal_len() + sets.nongoal_len();
    labeler.label_dataset(learner)?;
    let mut fresh = LabeledStateSets::new();
    for t in &learner.trajectories {
        for &g in &t.goal_indices {
            fresh.insert_goal(t.steps[g - 1].state.clone());
        }
    }
    for s in learner.states() {
        fresh.insert_nongoal(s.clone());
    }
    sets.union(&fresh);
    Ok(sets.goal_len() + sets.nongoal_len() - before)
}

/// Mean over trajectories of the fraction of consecutive state pairs whose
/// reward does not decrease. Trajectories with one state count as 1.
pub fn shaping_audit(reward: &RewardProgram, dplus: &TrajectoryDataset) -> f64 {
    if dplus.is_empty() {
        return 1.0;
    }
    let per: Vec<f64> = dplus
        .trajectories
        .par_iter()
        .map(|t| {
            let v: Vec<f64> = t.states().map(|s| reward.evaluate(s).reward()).collect();
            if v.len() < 2 {
                return 1.0;
            }
            let ok = v.windows(2).filter(|w| w[1] >= w[0]).count();
            ok as f64 / (v.len() - 1) as f64
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}
