//! Population-based search over reward programs.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::RewardProgram;
use crate::fitness::{compute_fitness, FitnessError, FitnessReport, DEFAULT_TAU};
use crate::mutation::{build_context, FeedbackConfig, MutationError, Mutator};
use crate::sets::LabeledStateSets;
use crate::trajectory::TrajectoryDataset;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error("only {got} of {want} initial programs could be produced: {last}")]
    Init { got: usize, want: usize, last: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population_size: usize,
    pub elite_count: usize,
    /// Mutations per generation.
    pub mutation_steps: usize,
    pub generations: usize,
    pub tau: f64,
    pub rng_seed: u64,
    pub feedback: FeedbackConfig,
    /// Attempts per initial slot before giving up.
    pub init_retries: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 20,
            elite_count: 4,
            mutation_steps: 20,
            generations: 100,
            tau: DEFAULT_TAU,
            rng_seed: 0,
            feedback: FeedbackConfig::default(),
            init_retries: 3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let fail = |m: &str| Err(SearchError::Config(m.into()));
        if self.population_size == 0 {
            return fail("population_size must be at least 1");
        }
        if self.elite_count >= self.population_size {
            return fail("elite_count must be below population_size");
        }
        if self.mutation_steps == 0 {
            return fail("mutation_steps must be at least 1");
        }
        if !self.tau.is_finite() {
            return fail("tau must be finite");
        }
        Ok(())
    }

    /// Deterministic generator for one (generation, slot) pair.
    pub fn rng_for(&self, generation: usize, slot: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(((generation as u64) << 32) | slot as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub program: RewardProgram,
    pub report: FitnessReport,
}

impl Member {
    pub fn fitness(&self) -> f64 {
        self.report.fitness
    }
}

/// Best-first order: fitness, then earlier generation, then source.
pub fn rank(a: &Member, b: &Member) -> Ordering {
    b.fitness()
        .total_cmp(&a.fitness())
        .then(a.program.created_generation.cmp(&b.program.created_generation))
        .then_with(|| a.program.source.cmp(&b.program.source))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Member>,
    pub capacity: usize,
    pub elite_count: usize,
    pub generation: usize,
}

/// What happened in one generation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundStats {
    pub generation: usize,
    pub mutations_attempted: usize,
    pub mutations_accepted: usize,
    pub mutation_failures: usize,
    pub max_fitness: f64,
    pub mean_fitness: f64,
    /// Programs admitted this round, in admission order.
    pub accepted: Vec<RewardProgram>,
}

impl Population {
    pub fn max_fitness(&self) -> f64 {
        self.members.iter().map(Member::fitness).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_fitness(&self) -> f64 {
        self.members.iter().map(Member::fitness).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.members.iter().map(Member::fitness).sum::<f64>() / self.members.len().max(1) as f64
    }

    pub fn best(&self) -> &Member {
        self.members.iter().min_by(|a, b| rank(a, b)).expect("nonempty population")
    }

    /// Recomputes every report against new sets.
    pub fn rescore(&mut self, sets: &LabeledStateSets, tau: f64) -> Result<(), FitnessError> {
        let reports: Vec<_> = self
            .members
            .par_iter()
            .map(|m| compute_fitness(&m.program, sets, tau))
            .collect::<Result<_, _>>()?;
        for (m, r) in self.members.iter_mut().zip(reports) {
            m.report = r;
        }
        Ok(())
    }

    /// Index of the member to evict: the lowest-ranked one outside the elite.
    fn eviction_index(&self) -> usize {
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_by(|&a, &b| rank(&self.members[a], &self.members[b]));
        let victim = *order.last().unwrap();
        let elite = &order[..self.elite_count.min(order.len() - 1)];
        if elite.contains(&victim) {
            log::warn!("lowest member is elite; evicting the lowest non-elite member");
            return order[self.elite_count.min(order.len() - 1)..].last().copied().unwrap();
        }
        victim
    }

    /// Admits `candidate` iff its fitness strictly exceeds the minimum.
    pub fn admit(&mut self, candidate: Member) -> bool {
        if self.members.len() < self.capacity {
            self.members.push(candidate);
            return true;
        }
        if candidate.fitness() <= self.min_fitness() {
            return false;
        }
        let i = self.eviction_index();
        self.members[i] = candidate;
        true
    }
}

/// Softmax selection over fitness.
pub fn select_parent<'a>(pop: &'a Population, rng: &mut impl Rng) -> &'a Member {
    let max = pop.max_fitness();
    let weights: Vec<f64> = pop.members.iter().map(|m| (m.fitness() - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (m, w) in pop.members.iter().zip(&weights) {
        if u < *w {
            return m;
        }
        u -= w;
    }
    pop.members.last().unwrap()
}

pub fn init_population(
    sets: &LabeledStateSets,
    mutator: &Mutator<'_>,
    config: &SearchConfig,
) -> Result<Population, SearchError> {
    config.validate()?;
    let mut members: Vec<Member> = Vec::with_capacity(config.population_size);
    let mut last = String::new();
    for slot in 0..config.population_size {
        for attempt in 0..config.init_retries.max(1) {
            let mut rng = config.rng_for(0, slot * 64 + attempt);
            match mutator.init_program(sets, slot + attempt * config.population_size, &mut rng) {
                Ok(program) => {
                    let report = compute_fitness(&program, sets, config.tau)?;
                    members.push(Member { program, report });
                    break;
                }
                Err(e) => {
                    log::warn!("initial program {slot}: {e}");
                    last = e.to_string();
                }
            }
        }
        if members.len() <= slot {
            return Err(SearchError::Init {
                got: members.len(),
                want: config.population_size,
                last,
            });
        }
    }
    Ok(Population {
        members,
        capacity: config.population_size,
        elite_count: config.elite_count,
        generation: 0,
    })
}

/// One generation: up to K candidates from parents drawn at the start of
/// the round, produced in parallel and admitted serially by index.
pub fn evo_search_round(
    pop: &mut Population,
    sets: &LabeledStateSets,
    dplus: &TrajectoryDataset,
    mutator: &Mutator<'_>,
    config: &SearchConfig,
) -> RoundStats {
    pop.generation += 1;
    let generation = pop.generation;
    let mut stats = RoundStats {
        generation,
        ..RoundStats::default()
    };
    if pop.max_fitness() < 1.0 {
        let mut rng = config.rng_for(generation, usize::MAX >> 32);
        let jobs: Vec<(usize, Member, ChaCha8Rng)> = (0..config.mutation_steps)
            .map(|k| (k, select_parent(pop, &mut rng).clone(), config.rng_for(generation, k)))
            .collect();
        let donors: Vec<&RewardProgram> = pop.members.iter().map(|m| &m.program).collect();
        let offspring: Vec<Result<Member, MutationError>> = jobs
            .into_par_iter()
            .map(|(_, parent, mut rng)| {
                let ctx = build_context(&parent.program, &parent.report, sets, dplus, &config.feedback, &mut rng)?;
                let mut program = mutator.mutate(&ctx, &donors)?;
                program.created_generation = generation;
                let report = compute_fitness(&program, sets, config.tau).map_err(|e| MutationError::Unparseable(e.to_string()))?;
                Ok(Member { program, report })
            })
            .collect();
        for child in offspring {
            if pop.max_fitness() >= 1.0 {
                break;
            }
            stats.mutations_attempted += 1;
            match child {
                Ok(child) => {
                    let program = child.program.clone();
                    if pop.admit(child) {
                        stats.mutations_accepted += 1;
                        stats.accepted.push(program);
                    }
                }
                Err(e) => {
                    log::debug!("generation {generation}: mutation skipped: {e}");
                    stats.mutation_failures += 1;
                }
            }
        }
    }
    stats.max_fitness = pop.max_fitness();
    stats.mean_fitness = pop.mean_fitness();
    stats
}

/// Runs rounds until the generation budget is spent or a program separates
/// the training sets perfectly.
pub fn evolve(
    pop: &mut Population,
    sets: &LabeledStateSets,
    dplus: &TrajectoryDataset,
    mutator: &Mutator<'_>,
    config: &SearchConfig,
    generations: usize,
) -> Vec<RoundStats> {
    let mut out = Vec::new();
    for _ in 0..generations {
        out.push(evo_search_round(pop, sets, dplus, mutator, config));
        if pop.max_fitness() >= 1.0 {
            break;
        }
    }
    out
}
