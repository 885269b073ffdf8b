//! The outer loop: data and labels, then alternating search and policy
//! phases, with everything a run produces written under one directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! metrics.csv        one row per generation
//! events.csv         expansions, shaping, termination
//! accepted.jsonl     every admitted program with its generation (0 = initial)
//! best/gen_NNNN.rwd  best program after each generation
//! data/              labeled train and test splits
//! state/             population, learner data and policy for resuming
//! ```

pub mod config;
pub mod metrics;
pub mod reuse;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

pub use config::{DataConfig, LabelerKind, LoopConfig, MutatorKind};
pub use metrics::{validate_metrics, Event, EventKind, MetricsRow, METRICS_HEADER};
pub use reuse::{analyze_reuse, ReuseRecord, ReuseReport};

use crate::dsl::{parse_program_at, RewardProgram};
use crate::fitness::{compute_fitness, FitnessReport};
use crate::gridworld::{Env, EnvConfig};
use crate::labeler::{build_labeled_sets, sets_from_labels, Labeler};
use crate::llm::LlmGateway;
use crate::mutation::{build_shaping_context, Mutator};
use crate::rl::{data_expand, eval_success, train_policy, PolicyParams};
use crate::search::{evo_search_round, init_population, Member, Population};
use crate::sets::LabeledStateSets;
use crate::trajectory::{load_dataset, save_dataset, split_train_test, Provenance, TrajectoryDataset};

/// Train and test splits, each as demonstrations plus negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train_plus: TrajectoryDataset,
    pub train_minus: TrajectoryDataset,
    pub test_plus: TrajectoryDataset,
    pub test_minus: TrajectoryDataset,
}

impl Splits {
    pub fn train_sets(&self) -> LabeledStateSets {
        sets_from_labels(&self.train_plus, &self.train_minus)
    }

    pub fn test_sets(&self) -> LabeledStateSets {
        sets_from_labels(&self.test_plus, &self.test_minus)
    }
}

pub fn env_for(data: &DataConfig) -> anyhow::Result<Env> {
    Ok(Env::new(
        EnvConfig::new(&data.task, data.grid_size)
            .with_max_steps(data.max_steps)
            .with_seed(data.seed),
    )?)
}

/// Generates (or loads) the dataset, splits it, and labels it: training
/// demonstrations with the configured labeler, everything else with the
/// oracle.
pub fn prepare_splits(config: &LoopConfig, gateway: Option<&LlmGateway>) -> anyhow::Result<Splits> {
    let d = &config.data;
    let all = match &d.dataset {
        Some(path) => load_dataset(path)?,
        None => env_for(d)?.generate_dataset(d.n_expert_train + d.n_expert_test, d.n_negative_train + d.n_negative_test, d.seed),
    };
    let (train, test) = split_train_test(&all, d.n_expert_train, d.n_negative_train, d.seed)?;
    let mut train_plus = train.with_provenance(Provenance::Expert);
    let mut train_minus = train.with_provenance(Provenance::Random);
    let mut test_plus = test.with_provenance(Provenance::Expert);
    let mut test_minus = test.with_provenance(Provenance::Random);
    labeler(config, gateway, None)?.label_dataset(&mut train_plus)?;
    for ds in [&mut train_minus, &mut test_plus, &mut test_minus] {
        Labeler::Oracle.label_dataset(ds)?;
    }
    Ok(Splits {
        train_plus,
        train_minus,
        test_plus,
        test_minus,
    })
}

fn labeler<'a>(
    config: &LoopConfig,
    gateway: Option<&'a LlmGateway>,
    current_reward: Option<&'a str>,
) -> anyhow::Result<Labeler<'a>> {
    Ok(match config.labeler.kind {
        LabelerKind::Oracle => Labeler::Oracle,
        LabelerKind::Llm => Labeler::Llm {
            gateway: gateway.ok_or_else(|| anyhow!("the LLM labeler needs a gateway"))?,
            current_reward,
        },
    })
}

pub fn mutator<'a>(config: &LoopConfig, gateway: Option<&'a LlmGateway>) -> anyhow::Result<Mutator<'a>> {
    Ok(match config.search.mutator {
        MutatorKind::Rule => Mutator::RuleBased,
        MutatorKind::Llm => Mutator::Llm(gateway.ok_or_else(|| anyhow!("the LLM mutator needs a gateway"))?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SavedProgram {
    generation: usize,
    source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SavedState {
    generation: usize,
    members: Vec<SavedProgram>,
    shaped: Option<SavedProgram>,
    env_steps: usize,
    finished: bool,
}

/// Everything a finished (or stopped) run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    pub events: Vec<Event>,
    pub best: RewardProgram,
    pub best_report: FitnessReport,
    pub test_report: FitnessReport,
    pub reuse: ReuseReport,
    pub final_success: Option<f64>,
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn new(root: &Path) -> anyhow::Result<RunDir> {
        for sub in ["best", "data", "state"] {
            fs::create_dir_all(root.join(sub)).with_context(|| format!("creating {}", root.display()))?;
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn append_accepted(&self, programs: &[RewardProgram], generation: usize) -> anyhow::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("accepted.jsonl"))?;
        for p in programs {
            let rec = SavedProgram {
                generation,
                source: p.source.clone(),
            };
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    fn write_best(&self, generation: usize, p: &RewardProgram) -> anyhow::Result<()> {
        fs::write(self.path(&format!("best/gen_{generation:04}.rwd")), &p.source)?;
        Ok(())
    }

    fn save_state(&self, state: &SavedState, policy: Option<&PolicyParams>) -> anyhow::Result<()> {
        fs::write(self.path("state/population.json"), serde_json::to_string_pretty(state)?)?;
        if let Some(p) = policy {
            fs::write(self.path("state/policy.json"), serde_json::to_string(p)?)?;
        }
        Ok(())
    }
}

/// Accepted programs grouped by generation, from a run directory.
pub fn load_history(run_dir: &Path) -> anyhow::Result<Vec<(usize, Vec<RewardProgram>)>> {
    let path = run_dir.join("accepted.jsonl");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out: Vec<(usize, Vec<RewardProgram>)> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: SavedProgram = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let p = parse_program_at(&rec.source, rec.generation)
            .with_context(|| format!("{}:{}: accepted program does not parse", path.display(), i + 1))?;
        match out.last_mut() {
            Some((g, ps)) if *g == rec.generation => ps.push(p),
            _ => out.push((rec.generation, vec![p])),
        }
    }
    Ok(out)
}

fn score(program: RewardProgram, sets: &LabeledStateSets, tau: f64) -> anyhow::Result<Member> {
    let report = compute_fitness(&program, sets, tau)?;
    Ok(Member { program, report })
}

/// Runs the full loop into `out_dir`. With `resume`, continues from the
/// state a previous run left there.
pub fn run_loop(
    config: &LoopConfig,
    out_dir: &Path,
    gateway: Option<&LlmGateway>,
    resume: bool,
) -> anyhow::Result<RunMetrics> {
    config.validate()?;
    let dir = RunDir::new(out_dir)?;
    let search = config.search.search_config();
    let mutator = mutator(config, gateway)?;
    let env = env_for(&config.data)?;
    let state_path = dir.path("state/population.json");
    let resuming = resume && state_path.exists();

    // Phase 1: data, labels, initial population
    let (splits, mut learner) = if resuming {
        let load = |name: &str| load_dataset(&dir.path(name));
        (
            Splits {
                train_plus: load("data/train_plus.jsonl")?,
                train_minus: load("data/train_minus.jsonl")?,
                test_plus: load("data/test_plus.jsonl")?,
                test_minus: load("data/test_minus.jsonl")?,
            },
            match dir.path("state/learner.jsonl") {
                p if p.exists() => load_dataset(&p)?,
                _ => TrajectoryDataset::default(),
            },
        )
    } else {
        let s = prepare_splits(config, gateway).context("phase 1 (data and labels)")?;
        save_dataset(&s.train_plus, &dir.path("data/train_plus.jsonl"))?;
        save_dataset(&s.train_minus, &dir.path("data/train_minus.jsonl"))?;
        save_dataset(&s.test_plus, &dir.path("data/test_plus.jsonl"))?;
        save_dataset(&s.test_minus, &dir.path("data/test_minus.jsonl"))?;
        for name in ["metrics.csv", "events.csv", "accepted.jsonl", "state/learner.jsonl", "state/policy.json"] {
            let _ = fs::remove_file(dir.path(name));
        }
        (s, TrajectoryDataset::default())
    };
    let mut sets = build_labeled_sets(
        &splits.train_plus,
        &splits.train_minus,
        &crate::labeler::stored_labels(&splits.train_plus),
    )?;
    sets.union(&sets_from_labels(&learner, &TrajectoryDataset::default()));
    let test_sets = splits.test_sets();

    let mut rows: Vec<MetricsRow>;
    let mut events: Vec<Event>;
    let mut pop: Population;
    let mut shaped: Option<Member> = None;
    let mut env_steps;
    let mut policy: Option<PolicyParams> = None;
    let mut finished;
    if resuming {
        let saved: SavedState = serde_json::from_str(&fs::read_to_string(&state_path)?)?;
        rows = metrics::read_csv(&dir.path("metrics.csv")).unwrap_or_default();
        rows.truncate(saved.generation);
        events = metrics::read_csv(&dir.path("events.csv")).unwrap_or_default();
        events.retain(|e| e.generation <= saved.generation);
        let members = saved
            .members
            .iter()
            .map(|m| score(parse_program_at(&m.source, m.generation)?, &sets, search.tau))
            .collect::<anyhow::Result<Vec<_>>>()?;
        pop = Population {
            members,
            capacity: search.population_size,
            elite_count: search.elite_count,
            generation: saved.generation,
        };
        if let Some(s) = saved.shaped {
            shaped = Some(score(parse_program_at(&s.source, s.generation)?, &sets, search.tau)?);
        }
        env_steps = saved.env_steps;
        finished = saved.finished;
        if let Ok(text) = fs::read_to_string(dir.path("state/policy.json")) {
            policy = Some(serde_json::from_str(&text)?);
        }
        log::info!("resuming after generation {}", saved.generation);
    } else {
        pop = init_population(&sets, &mutator, &search).context("phase 1 (initial population)")?;
        dir.append_accepted(&pop.members.iter().map(|m| m.program.clone()).collect::<Vec<_>>(), 0)?;
        rows = Vec::new();
        events = Vec::new();
        env_steps = 0;
        finished = false;
    }
    let mut history = load_history(&dir.root)?;
    let mut final_success = rows.iter().rev().find_map(|r| r.rl_success);
    let rl = &config.rl;

    while !finished && pop.generation < search.generations {
        // Phase 2
        let stats = evo_search_round(&mut pop, &sets, &splits.train_plus, &mutator, &search);
        let generation = stats.generation;
        dir.append_accepted(&stats.accepted, generation)?;
        history.push((generation, stats.accepted.clone()));
        let reuse = analyze_reuse(&history);
        let rec = reuse.per_generation.last().cloned().unwrap();
        let best = pop.best().clone();
        dir.write_best(generation, &best.program)?;
        let test_fitness = compute_fitness(&best.program, &test_sets, search.tau)?.fitness;
        let mut row = MetricsRow {
            generation,
            max_train_fitness: stats.max_fitness,
            mean_train_fitness: stats.mean_fitness,
            test_fitness_best: test_fitness,
            mutations_attempted: stats.mutations_attempted,
            mutations_accepted: stats.mutations_accepted,
            new_helpers: rec.new_helpers,
            reused_helpers: rec.reused_helpers,
            rl_success: None,
            env_steps,
        };

        // Phase 3
        if rl.budget > 0 && pop.max_fitness() >= rl.trigger_fitness {
            if shaped.as_ref().is_some_and(|s| s.fitness() < best.fitness()) {
                shaped = None;
            }
            let reward = shaped.as_ref().map_or(&best.program, |s| &s.program).clone();
            let init = if rl.warm_start { policy.as_ref() } else { None };
            let outcome = train_policy(&env, &reward, &rl.rl_config(), rl.seed.wrapping_add(generation as u64), init)
                .with_context(|| format!("generation {generation}, phase 3 (training)"))?;
            env_steps += outcome.env_steps;
            let success = eval_success(&outcome.policy, &env, rl.eval_episodes, rl.seed)?;
            row.rl_success = Some(success);
            row.env_steps = env_steps;
            final_success = Some(success);
            policy = Some(outcome.policy.clone());
            if success >= rl.success_threshold {
                events.push(Event {
                    generation,
                    kind: EventKind::Solved,
                    detail: format!("greedy success {success}"),
                });
                finished = true;
            } else {
                if shaped.is_none() && best.fitness() >= rl.shaping_fitness && success < rl.shaping_success {
                    let mut rng = search.rng_for(generation, 1 << 30);
                    let ctx = build_shaping_context(&best.program, &splits.train_plus, &outcome.trajectories, &mut rng);
                    let donors: Vec<&RewardProgram> = pop.members.iter().map(|m| &m.program).collect();
                    match mutator.mutate(&ctx, &donors) {
                        Ok(mut p) => {
                            p.created_generation = generation;
                            let candidate = score(p, &sets, search.tau)?;
                            if candidate.fitness() >= best.fitness() && candidate.program.source != best.program.source {
                                events.push(Event {
                                    generation,
                                    kind: EventKind::Shaped,
                                    detail: format!("fitness {}", candidate.fitness()),
                                });
                                shaped = Some(candidate);
                            }
                        }
                        Err(e) => log::warn!("generation {generation}: shaping failed: {e}"),
                    }
                }
                let keep = rl.expand_trajectories.min(outcome.trajectories.len());
                let mut fresh =
                    TrajectoryDataset::new(outcome.trajectories.trajectories[outcome.trajectories.len() - keep..].to_vec());
                let current = reward.source.clone();
                let added = data_expand(&mut fresh, &labeler(config, gateway, Some(&current))?, &mut sets)
                    .with_context(|| format!("generation {generation}, phase 3 (labeling learner data)"))?;
                learner.extend(fresh);
                save_dataset(&learner, &dir.path("state/learner.jsonl"))?;
                pop.rescore(&sets, search.tau)?;
                if let Some(s) = shaped.take() {
                    shaped = Some(score(s.program, &sets, search.tau)?);
                }
                events.push(Event {
                    generation,
                    kind: EventKind::Expand,
                    detail: format!("{added} new states"),
                });
            }
        } else if rl.budget == 0 && pop.max_fitness() >= 1.0 {
            events.push(Event {
                generation,
                kind: EventKind::Converged,
                detail: "training sets separated".into(),
            });
            finished = true;
        }
        rows.push(row);
        metrics::write_csv(&dir.path("metrics.csv"), &rows)?;
        metrics::write_csv(&dir.path("events.csv"), &events)?;
        let saved = SavedState {
            generation,
            members: pop
                .members
                .iter()
                .map(|m| SavedProgram {
                    generation: m.program.created_generation,
                    source: m.program.source.clone(),
                })
                .collect(),
            shaped: shaped.as_ref().map(|s| SavedProgram {
                generation: s.program.created_generation,
                source: s.program.source.clone(),
            }),
            env_steps,
            finished,
        };
        dir.save_state(&saved, policy.as_ref())?;
    }
    if rows.is_empty() {
        fs::write(dir.path("metrics.csv"), format!("{METRICS_HEADER}\n"))?;
        let saved = SavedState {
            generation: pop.generation,
            members: pop
                .members
                .iter()
                .map(|m| SavedProgram {
                    generation: m.program.created_generation,
                    source: m.program.source.clone(),
                })
                .collect(),
            shaped: None,
            env_steps,
            finished,
        };
        dir.save_state(&saved, policy.as_ref())?;
    }
    validate_metrics(&rows, &events).map_err(|e| anyhow!("metrics check failed: {e}"))?;
    let best = match &shaped {
        Some(s) if s.fitness() >= pop.best().fitness() => s.clone(),
        _ => pop.best().clone(),
    };
    let test_report = compute_fitness(&best.program, &test_sets, search.tau)?;
    Ok(RunMetrics {
        rows,
        events,
        best_report: best.report.clone(),
        best: best.program,
        test_report,
        reuse: analyze_reuse(&history),
        final_success,
    })
}

/// Fitness of a program file on labeled datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEvaluation {
    pub train: FitnessReport,
    pub test: Option<FitnessReport>,
}

/// Scores a program on datasets, labeling any trajectory that has no stored
/// labels with the oracle. A dataset's expert trajectories supply goal
/// states; every other state is a non-goal.
pub fn eval_reward(program: &Path, train: &Path, test: Option<&Path>, tau: f64) -> anyhow::Result<RewardEvaluation> {
    let src = fs::read_to_string(program).with_context(|| format!("reading {}", program.display()))?;
    let p = crate::dsl::parse_program(&src).map_err(|e| anyhow!("{}: {e}", program.display()))?;
    let sets_of = |path: &Path| -> anyhow::Result<LabeledStateSets> {
        let mut ds = load_dataset(path)?;
        for t in &mut ds.trajectories {
            if t.goal_indices.is_empty() {
                t.goal_indices = crate::labeler::label_oracle(t, 0).goal_indices;
            }
        }
        let plus = ds.with_provenance(Provenance::Expert);
        let mut minus = ds.with_provenance(Provenance::Random);
        minus.extend(ds.with_provenance(Provenance::Learner));
        Ok(sets_from_labels(&plus, &minus))
    };
    let train = compute_fitness(&p, &sets_of(train)?, tau)?;
    let test = match test {
        Some(t) => Some(compute_fitness(&p, &sets_of(t)?, tau)?),
        None => None,
    };
    Ok(RewardEvaluation { train, test })
}

/// Writes a dataset of `n_expert` demonstrations and `n_random` negatives.
pub fn generate_data(data: &DataConfig, n_expert: usize, n_random: usize, out: &Path) -> anyhow::Result<TrajectoryDataset> {
    let ds = env_for(data)?.generate_dataset(n_expert, n_random, data.seed);
    if ds.is_empty() {
        bail!("nothing generated");
    }
    save_dataset(&ds, out)?;
    Ok(ds)
}
