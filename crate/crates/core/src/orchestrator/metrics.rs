//! Per-generation metrics rows, the event log, and their validator.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "generation,max_train_fitness,mean_train_fitness,test_fitness_best,mutations_attempted,mutations_accepted,new_helpers,reused_helpers,rl_success,env_steps";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub generation: usize,
    pub max_train_fitness: f64,
    pub mean_train_fitness: f64,
    pub test_fitness_best: f64,
    pub mutations_attempted: usize,
    pub mutations_accepted: usize,
    pub new_helpers: usize,
    pub reused_helpers: usize,
    /// Empty when no policy was trained in this generation.
    pub rl_success: Option<f64>,
    /// Cumulative environment steps.
    pub env_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub generation: usize,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Learner states were merged into the labeled sets after this
    /// generation's row was written.
    Expand,
    Shaped,
    Converged,
    Solved,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().with_context(|| format!("parsing {}", path.display()))
}

/// Checks the metrics file shape: consecutive generations from 1, fitness
/// in range, cumulative step counts, and a max-fitness column that only
/// drops right after a data expansion.
pub fn validate_metrics(rows: &[MetricsRow], events: &[Event]) -> Result<(), String> {
    for (i, r) in rows.iter().enumerate() {
        if r.generation != i + 1 {
            return Err(format!("row {i}: generation {} out of sequence", r.generation));
        }
        for (name, v) in [
            ("max_train_fitness", r.max_train_fitness),
            ("mean_train_fitness", r.mean_train_fitness),
            ("test_fitness_best", r.test_fitness_best),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(format!("generation {}: {name} {v} outside [-1, 1]", r.generation));
            }
        }
        if r.mean_train_fitness > r.max_train_fitness + 1e-12 {
            return Err(format!("generation {}: mean above max", r.generation));
        }
        if r.mutations_accepted > r.mutations_attempted {
            return Err(format!("generation {}: more accepted than attempted", r.generation));
        }
        if let Some(s) = r.rl_success {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("generation {}: rl_success {s} outside [0, 1]", r.generation));
            }
        }
    }
    for w in rows.windows(2) {
        let expanded = events
            .iter()
            .any(|e| e.kind == EventKind::Expand && e.generation == w[0].generation);
        if w[1].max_train_fitness < w[0].max_train_fitness && !expanded {
            return Err(format!(
                "generation {}: max_train_fitness fell from {} to {} without new data",
                w[1].generation, w[0].max_train_fitness, w[1].max_train_fitness
            ));
        }
        if w[1].env_steps < w[0].env_steps {
            return Err(format!("generation {}: env_steps decreased", w[1].generation));
        }
    }
    Ok(())
}
