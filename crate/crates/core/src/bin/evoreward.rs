use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use evoreward::dsl::parse_program;
use evoreward::labeler::Labeler;
use evoreward::orchestrator::{
    analyze_reuse, env_for, eval_reward, generate_data, load_history, run_loop, LabelerKind, LoopConfig, MutatorKind,
};
use evoreward::rl::{eval_success, train_policy};
use evoreward::trajectory::{load_dataset, save_dataset};

#[derive(Parser)]
#[command(name = "evoreward", version, about = "Evolve reward programs from demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    /// Policy-training budget in environment steps.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_parser = ["rule", "llm"])]
    mutator: Option<String>,
    #[arg(long, value_parser = ["oracle", "llm"])]
    labeler: Option<String>,
}

impl Common {
    fn load(&self) -> anyhow::Result<LoopConfig> {
        let mut c = match &self.config {
            Some(p) => LoopConfig::load(p)?,
            None => LoopConfig::default(),
        };
        if let Some(t) = &self.task {
            c.data.task = t.clone();
        }
        if let Some(s) = self.seed {
            c.data.seed = s;
            c.search.seed = s;
            c.rl.seed = s;
        }
        if let Some(g) = self.generations {
            c.search.generations = g;
        }
        if let Some(b) = self.budget {
            c.rl.budget = b;
        }
        if let Some(m) = &self.mutator {
            c.search.mutator = if m == "llm" { MutatorKind::Llm } else { MutatorKind::Rule };
        }
        if let Some(l) = &self.labeler {
            c.labeler.kind = if l == "llm" { LabelerKind::Llm } else { LabelerKind::Oracle };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Roll out expert and random trajectories into a JSONL dataset.
    GenerateData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 58)]
        n_expert: usize,
        #[arg(long, default_value_t = 58)]
        n_random: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Attach goal-state labels to the expert trajectories of a dataset.
    LabelGoals {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Search only: no policy training.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a policy on a reward program and report greedy success.
    TrainRl {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        reward: PathBuf,
        /// Where to write the policy parameters as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// The full loop, written to a run directory.
    RunLoop {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
        /// Continue from the state left in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a program on datasets; exits 0 only when test fitness is 1.
    EvalReward {
        #[arg(long, short)]
        program: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = evoreward::fitness::DEFAULT_TAU)]
        tau: f64,
    },
    /// Per-generation helper creation and reuse for a run directory.
    AnalyzeReuse {
        run_dir: PathBuf,
    },
}

fn gateway(c: &LoopConfig) -> anyhow::Result<Option<evoreward::llm::LlmGateway>> {
    c.needs_llm().then(|| c.gateway()).transpose()
}

fn run_dir_summary(out: &Path, m: &evoreward::orchestrator::RunMetrics) {
    println!("generations: {}", m.rows.len());
    println!("best train fitness: {:.4}", m.best_report.fitness);
    println!("best test fitness: {:.4}", m.test_report.fitness);
    if let Some(s) = m.final_success {
        println!("greedy success: {s:.2}");
    }
    println!("metrics: {}", out.join("metrics.csv").display());
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenerateData {
            common,
            n_expert,
            n_random,
            out,
        } => {
            let c = common.load()?;
            let ds = generate_data(&c.data, n_expert, n_random, &out)?;
            println!("wrote {} trajectories to {}", ds.len(), out.display());
        }
        Command::LabelGoals { common, input, out } => {
            let c = common.load()?;
            let gw = gateway(&c)?;
            let labeler = match c.labeler.kind {
                LabelerKind::Oracle => Labeler::Oracle,
                LabelerKind::Llm => Labeler::Llm {
                    gateway: gw.as_ref().unwrap(),
                    current_reward: None,
                },
            };
            let mut ds = load_dataset(&input)?;
            let results = labeler.label_dataset(&mut ds)?;
            save_dataset(&ds, &out)?;
            let labeled = results.iter().filter(|r| !r.is_none()).count();
            println!("labeled {labeled} of {} trajectories", results.len());
        }
        Command::Evolve { common, out } => {
            let mut c = common.load()?;
            c.rl.budget = 0;
            let gw = gateway(&c)?;
            let m = run_loop(&c, &out, gw.as_ref(), false)?;
            run_dir_summary(&out, &m);
            println!("{}", m.best.source);
        }
        Command::TrainRl { common, reward, out } => {
            let c = common.load()?;
            let src = std::fs::read_to_string(&reward).with_context(|| format!("reading {}", reward.display()))?;
            let program = parse_program(&src).map_err(|e| anyhow::anyhow!("{}: {e}", reward.display()))?;
            let env = env_for(&c.data)?;
            let outcome = train_policy(&env, &program, &c.rl.rl_config(), c.rl.seed, None)?;
            let success = eval_success(&outcome.policy, &env, c.rl.eval_episodes, c.rl.seed)?;
            println!("env steps: {}", outcome.env_steps);
            println!("greedy success: {success:.2}");
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string(&outcome.policy)?)?;
            }
        }
        Command::RunLoop { common, out, resume } => {
            let c = common.load()?;
            let gw = gateway(&c)?;
            let m = run_loop(&c, &out, gw.as_ref(), resume)?;
            run_dir_summary(&out, &m);
        }
        Command::EvalReward {
            program,
            train,
            test,
            tau,
        } => {
            let r = eval_reward(&program, &train, test.as_deref(), tau)?;
            for (name, rep) in std::iter::once(("train", &r.train)).chain(r.test.as_ref().map(|t| ("test", t))) {
                println!(
                    "{name}: fitness {:.4}  false negatives {}/{}  false positives {}/{}  eval errors {}",
                    rep.fitness,
                    rep.false_negatives.len(),
                    rep.goal_count,
                    rep.false_positives.len(),
                    rep.nongoal_count,
                    rep.eval_errors
                );
                for m in &rep.false_positives {
                    println!("  false positive (value {}):\n{}", m.value, evoreward::render::render_state_text(&m.state));
                }
                for m in &rep.false_negatives {
                    println!("  false negative (value {}):\n{}", m.value, evoreward::render::render_state_text(&m.state));
                }
            }
            let decisive = r.test.as_ref().unwrap_or(&r.train);
            if decisive.fitness < 1.0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::AnalyzeReuse { run_dir } => {
            let report = analyze_reuse(&load_history(&run_dir)?);
            println!("generation,new_helpers,reused_helpers");
            for r in &report.per_generation {
                println!("{},{},{}", r.generation, r.new_helpers, r.reused_helpers);
            }
            println!();
            println!("helper_hash,programs,call_sites");
            for (h, n) in &report.programs_per_helper {
                println!("{h},{n},{}", report.calls_per_helper.get(h).copied().unwrap_or(0));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
