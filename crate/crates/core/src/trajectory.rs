//! Trajectories, datasets and their JSONL persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{Cell, Color, GridState, ObjectKind, StateError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    State {
        line: usize,
        #[source]
        source: StateError,
    },
    #[error("invalid trajectory: {0}")]
    Invalid(String),
    #[error("requested {requested} {provenance} trajectories, only {available} available")]
    Insufficient {
        provenance: Provenance,
        requested: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Expert,
    Random,
    Learner,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Expert => "expert",
            Provenance::Random => "random",
            Provenance::Learner => "learner",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: GridState,
    pub action: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task_id: String,
    pub instruction: String,
    pub steps: Vec<Step>,
    pub provenance: Provenance,
    /// 1-based indices into `steps`; empty until labeled.
    pub goal_indices: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &GridState> {
        self.steps.iter().map(|s| &s.state)
    }

    pub fn final_state(&self) -> &GridState {
        &self.steps.last().expect("empty trajectory").state
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.steps.is_empty() {
            return Err(DatasetError::Invalid("trajectory has no steps".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.state.step_index != i {
                return Err(DatasetError::Invalid(format!(
                    "step {i} has step_index {}",
                    step.state.step_index
                )));
            }
            step.state
                .validate()
                .map_err(|e| DatasetError::Invalid(format!("step {i}: {e}")))?;
        }
        if let Some(&bad) = self
            .goal_indices
            .iter()
            .find(|&&g| g == 0 || g > self.steps.len())
        {
            return Err(DatasetError::Invalid(format!(
                "goal index {bad} outside 1..={}",
                self.steps.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        TrajectoryDataset { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.provenance == provenance)
            .count()
    }

    pub fn with_provenance(&self, provenance: Provenance) -> TrajectoryDataset {
        TrajectoryDataset::new(
            self.trajectories
                .iter()
                .filter(|t| t.provenance == provenance)
                .cloned()
                .collect(),
        )
    }

    pub fn extend(&mut self, other: TrajectoryDataset) {
        self.trajectories.extend(other.trajectories);
    }

    pub fn states(&self) -> impl Iterator<Item = &GridState> {
        self.trajectories.iter().flat_map(|t| t.states())
    }
}

impl FromIterator<Trajectory> for TrajectoryDataset {
    fn from_iter<I: IntoIterator<Item = Trajectory>>(iter: I) -> Self {
        TrajectoryDataset::new(iter.into_iter().collect())
    }
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    cells: Vec<Vec<[u8; 3]>>,
    action: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    carrying: Option<[u8; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    under: Option<[u8; 3]>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    task_id: String,
    instruction: String,
    provenance: Provenance,
    goal_indices: Vec<usize>,
    steps: Vec<StepRecord>,
}

impl TrajectoryRecord {
    fn from_trajectory(t: &Trajectory) -> Self {
        TrajectoryRecord {
            task_id: t.task_id.clone(),
            instruction: t.instruction.clone(),
            provenance: t.provenance,
            goal_indices: t.goal_indices.clone(),
            steps: t
                .steps
                .iter()
                .map(|s| StepRecord {
                    cells: s.state.cell_rows(),
                    action: s.action,
                    carrying: s.state.carrying.map(|(o, c)| [o.code(), c.code()]),
                    under: (s.state.under_agent != Cell::EMPTY).then(|| s.state.under_agent.triple()),
                })
                .collect(),
        }
    }

    fn into_trajectory(self) -> Result<Trajectory, StateError> {
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, rec) in self.steps.into_iter().enumerate() {
            let (width, height, cells) = GridState::from_cell_rows(&rec.cells)?;
            let carrying = match rec.carrying {
                Some([o, c]) => Some((ObjectKind::from_code(o)?, Color::from_code(c)?)),
                None => None,
            };
            let under_agent = match rec.under {
                Some(t) => Cell::from_triple(t)?,
                None => Cell::EMPTY,
            };
            let state = GridState {
                width,
                height,
                cells,
                instruction: self.instruction.clone(),
                step_index: i,
                carrying,
                under_agent,
            };
            state.validate()?;
            steps.push(Step {
                state,
                action: rec.action,
            });
        }
        Ok(Trajectory {
            task_id: self.task_id,
            instruction: self.instruction,
            steps,
            provenance: self.provenance,
            goal_indices: self.goal_indices,
        })
    }
}

pub fn trajectory_to_json(t: &Trajectory) -> String {
    serde_json::to_string(&TrajectoryRecord::from_trajectory(t)).expect("record serializes")
}

pub fn save_dataset(dataset: &TrajectoryDataset, path: &Path) -> Result<(), DatasetError> {
    for t in &dataset.trajectories {
        t.validate()?;
    }
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for t in &dataset.trajectories {
        writeln!(out, "{}", trajectory_to_json(t)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut trajectories = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line)
            .map_err(|source| DatasetError::Json { line: i + 1, source })?;
        let t = record
            .into_trajectory()
            .map_err(|source| DatasetError::State { line: i + 1, source })?;
        t.validate()?;
        trajectories.push(t);
    }
    Ok(TrajectoryDataset::new(trajectories))
}

/// Draws `n_expert_train` expert and `n_negative_train` random trajectories
/// into the training split; everything else, in original order, is the test
/// split.
pub fn split_train_test(
    dataset: &TrajectoryDataset,
    n_expert_train: usize,
    n_negative_train: usize,
    seed: u64,
) -> Result<(TrajectoryDataset, TrajectoryDataset), DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    for (provenance, requested) in [
        (Provenance::Expert, n_expert_train),
        (Provenance::Random, n_negative_train),
    ] {
        let mut pool: Vec<usize> = dataset
            .trajectories
            .iter()
            .enumerate()
            .filter(|(_, t)| t.provenance == provenance)
            .map(|(i, _)| i)
            .collect();
        if pool.len() < requested {
            return Err(DatasetError::Insufficient {
                provenance,
                requested,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        let mut chosen = pool[..requested].to_vec();
        chosen.sort_unstable();
        for i in chosen {
            in_train[i] = true;
        }
    }
    let mut train = TrajectoryDataset::default();
    let mut test = TrajectoryDataset::default();
    for (t, chosen) in dataset.trajectories.iter().zip(in_train) {
        if chosen {
            train.trajectories.push(t.clone());
        } else {
            test.trajectories.push(t.clone());
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{Direction, Pos};

    fn traj(provenance: Provenance, n: usize, tag: &str) -> Trajectory {
        let steps = (0..n)
            .map(|i| {
                let mut s = GridState::walled(5, 5, Pos::new(1 + (i as i64 % 3), 2), Direction::East)
                    .with_instruction(tag);
                s.step_index = i;
                Step { state: s, action: 2 }
            })
            .collect();
        Trajectory {
            task_id: "GoToObj".into(),
            instruction: tag.into(),
            steps,
            provenance,
            goal_indices: vec![],
        }
    }

    #[test]
    fn empty_dataset_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&TrajectoryDataset::default(), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn three_step_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut t = traj(Provenance::Expert, 3, "go to the red ball");
        t.goal_indices = vec![3];
        t.steps[1].state.carrying = Some((ObjectKind::Key, Color::Blue));
        t.steps[2].state.under_agent = Cell::door(Color::Red, 0);
        let ds = TrajectoryDataset::new(vec![t]);
        save_dataset(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn invalid_goal_index_is_rejected_on_save() {
        let mut t = traj(Provenance::Expert, 2, "x");
        t.goal_indices = vec![3];
        let dir = tempfile::tempdir().unwrap();
        let err = save_dataset(&TrajectoryDataset::new(vec![t]), &dir.path().join("d")).unwrap_err();
        assert!(matches!(err, DatasetError::Invalid(_)));
    }

    #[test]
    fn bad_enum_code_fails_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            r#"{"task_id":"t","instruction":"","provenance":"expert","goal_indices":[],"steps":[{"cells":[[[8,0,0],[42,0,0]]],"action":0}]}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(&path), Err(DatasetError::State { line: 1, .. })));
    }

    #[test]
    fn split_counts_and_determinism() {
        let ds: TrajectoryDataset = (0..20)
            .map(|i| traj(Provenance::Expert, 2, &format!("e{i}")))
            .chain((0..20).map(|i| traj(Provenance::Random, 2, &format!("r{i}"))))
            .collect();
        let (train, test) = split_train_test(&ds, 8, 8, 3).unwrap();
        assert_eq!(train.len(), 16);
        assert_eq!(test.len(), 24);
        assert_eq!(train.count(Provenance::Expert), 8);
        let (train2, _) = split_train_test(&ds, 8, 8, 3).unwrap();
        assert_eq!(train, train2);
        let (empty, full) = split_train_test(&ds, 0, 0, 3).unwrap();
        assert!(empty.is_empty());
        assert_eq!(full, ds);
        assert!(matches!(
            split_train_test(&ds, 21, 0, 3),
            Err(DatasetError::Insufficient { .. })
        ));
    }
}
