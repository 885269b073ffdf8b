//! Scripted expert: shortest-path navigation chained over per-task subgoals.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use super::tasks::{divider_column, strictly_between, Goal};
use super::{transition, Action};
use crate::state::{door, Color, Direction, GridState, ObjectKind, Pos};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("instruction not understood: {0:?}")]
    UnknownGoal(String),
    #[error("no path to {0:?}")]
    Unreachable(Pos),
    #[error("required object is missing: {0}")]
    Missing(&'static str),
    #[error("plan needs {needed} states, horizon is {horizon}")]
    HorizonExceeded { needed: usize, horizon: usize },
    #[error("plan finished without reaching the goal")]
    NotSolved,
}

/// Breadth-first search over `(position, direction)` poses for the shortest
/// action sequence that leaves the agent facing `target`.
fn face(s: &GridState, target: Pos) -> Option<Vec<Action>> {
    let start = (s.agent_pos(), s.agent_dir());
    let mut parent: HashMap<(Pos, Direction), ((Pos, Direction), Action)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    let mut seen = std::collections::HashSet::from([start]);
    while let Some(node @ (pos, dir)) = queue.pop_front() {
        if pos.step(dir) == target {
            let mut actions = Vec::new();
            let mut cur = node;
            while cur != start {
                let (prev, a) = parent[&cur];
                actions.push(a);
                cur = prev;
            }
            actions.reverse();
            return Some(actions);
        }
        let mut next = vec![((pos, dir.left()), Action::Left), ((pos, dir.right()), Action::Right)];
        let ahead = pos.step(dir);
        if s.ground(ahead).is_some_and(|c| c.is_passable()) {
            next.push(((ahead, dir), Action::Forward));
        }
        for (n, a) in next {
            if seen.insert(n) {
                parent.insert(n, (node, a));
                queue.push_back(n);
            }
        }
    }
    None
}

struct Planner {
    state: GridState,
    actions: Vec<Action>,
}

impl Planner {
    fn apply(&mut self, actions: &[Action]) {
        for &a in actions {
            self.state = transition(&self.state, a);
            self.actions.push(a);
        }
    }

    fn face_then(&mut self, target: Pos, action: Option<Action>) -> Result<(), SolveError> {
        let path = face(&self.state, target).ok_or(SolveError::Unreachable(target))?;
        self.apply(&path);
        if let Some(a) = action {
            self.apply(&[a]);
        }
        Ok(())
    }

    fn locate(&self, object: ObjectKind, color: Color, what: &'static str) -> Result<Pos, SolveError> {
        let found = self.state.find(object, Some(color));
        let agent = self.state.agent_pos();
        found
            .into_iter()
            .min_by_key(|p| (p.manhattan(agent), p.y, p.x))
            .ok_or(SolveError::Missing(what))
    }

    fn open_door(&mut self, color: Color) -> Result<(), SolveError> {
        let p = self.locate(ObjectKind::Door, color, "door")?;
        if self.state.ground(p).map(|c| c.extra) == Some(door::OPEN) {
            return Ok(());
        }
        self.face_then(p, Some(Action::Toggle))
    }

    /// Drops the carried object on the first candidate cell (by path length)
    /// after which `keep_reachable` can still be faced.
    fn drop_on_one_of(&mut self, candidates: Vec<Pos>, keep_reachable: Option<Pos>) -> Result<(), SolveError> {
        let mut options: Vec<(usize, Pos, Vec<Action>)> = candidates
            .into_iter()
            .filter(|&p| self.state.get(p).is_some_and(|c| c.object == ObjectKind::Empty))
            .filter_map(|p| face(&self.state, p).map(|path| (path.len(), p, path)))
            .collect();
        options.sort_by_key(|(len, p, _)| (*len, p.y, p.x));
        for (_, _, path) in options {
            let mut trial = Planner {
                state: self.state.clone(),
                actions: Vec::new(),
            };
            trial.apply(&path);
            trial.apply(&[Action::Drop]);
            if trial.state.carrying.is_some() {
                continue;
            }
            if keep_reachable.map_or(true, |t| face(&trial.state, t).is_some()) {
                self.apply(&trial.actions);
                return Ok(());
            }
        }
        Err(SolveError::Unreachable(self.state.agent_pos()))
    }
}

/// The action sequence the scripted expert takes from `start`.
pub fn expert_actions(start: &GridState) -> Result<Vec<Action>, SolveError> {
    let goal = Goal::parse(&start.instruction)
        .ok_or_else(|| SolveError::UnknownGoal(start.instruction.clone()))?;
    let mut p = Planner {
        state: start.clone(),
        actions: Vec::new(),
    };
    match goal {
        Goal::GoTo(o, c) => {
            let t = p.locate(o, c, "target")?;
            p.face_then(t, None)?;
        }
        Goal::OpenDoor(c) => p.open_door(c)?,
        Goal::OpenTwo(a, b) => {
            p.open_door(a)?;
            p.open_door(b)?;
        }
        Goal::Pickup(o, c) => {
            let t = p.locate(o, c, "target")?;
            p.face_then(t, Some(Action::Pickup))?;
        }
        Goal::PlaceBetween { target, a, b } => {
            let t = p.locate(target.0, target.1, "target")?;
            let pa = p.locate(a.0, a.1, "anchor")?;
            let pb = p.locate(b.0, b.1, "anchor")?;
            p.face_then(t, Some(Action::Pickup))?;
            let between: Vec<Pos> = p.state.positions().filter(|&q| strictly_between(q, pa, pb)).collect();
            p.drop_on_one_of(between, None)?;
        }
        Goal::OpenMatching => {
            let color = match p.state.carrying {
                Some((ObjectKind::Key, c)) => c,
                _ => {
                    let k = p
                        .state
                        .find(ObjectKind::Key, None)
                        .first()
                        .copied()
                        .ok_or(SolveError::Missing("key"))?;
                    p.state.ground(k).unwrap().color
                }
            };
            p.open_door(color)?;
        }
        Goal::SortColors => {
            let div = divider_column(&p.state).ok_or(SolveError::Missing("divider"))?;
            let door_pos = p
                .state
                .positions()
                .find(|q| q.x == div && p.state.ground(*q).is_some_and(|c| c.object == ObjectKind::Door))
                .ok_or(SolveError::Missing("door"))?;
            if p.state.ground(door_pos).unwrap().extra != door::OPEN {
                p.face_then(door_pos, Some(Action::Toggle))?;
            }
            let flank = |side: i64| Pos::new(div + side, door_pos.y);
            let room = |state: &GridState, side: i64| -> Vec<Pos> {
                state
                    .positions()
                    .filter(|q| (q.x - div).signum() == side && *q != flank(side))
                    .collect()
            };
            let red = p.locate(ObjectKind::Ball, Color::Red, "red ball")?;
            if red.x < div {
                p.face_then(red, Some(Action::Pickup))?;
                let blue = p.locate(ObjectKind::Ball, Color::Blue, "blue ball").ok();
                let cells = room(&p.state, 1);
                p.drop_on_one_of(cells, blue.filter(|b| b.x > div))?;
            }
            let blue = p.locate(ObjectKind::Ball, Color::Blue, "blue ball")?;
            if blue.x > div {
                p.face_then(blue, Some(Action::Pickup))?;
                let cells = room(&p.state, -1);
                p.drop_on_one_of(cells, None)?;
            }
        }
    }
    if goal.satisfied(&p.state) {
        Ok(p.actions)
    } else {
        Err(SolveError::NotSolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Cell;

    #[test]
    fn face_finds_shortest_turn() {
        let mut s = GridState::walled(6, 6, Pos::new(2, 2), Direction::East).with_instruction("go to the red ball");
        s.set(Pos::new(2, 1), Cell::object(ObjectKind::Ball, Color::Red));
        assert_eq!(face(&s, Pos::new(2, 1)).unwrap(), vec![Action::Left]);
        s.set(Pos::new(2, 1), Cell::EMPTY);
        s.set(Pos::new(4, 2), Cell::object(ObjectKind::Ball, Color::Red));
        assert_eq!(expert_actions(&s).unwrap(), vec![Action::Forward]);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let mut s = GridState::walled(6, 6, Pos::new(1, 1), Direction::East).with_instruction("go to the red ball");
        s.set(Pos::new(4, 4), Cell::object(ObjectKind::Ball, Color::Red));
        for p in [Pos::new(3, 4), Pos::new(4, 3), Pos::new(3, 3)] {
            s.set(p, Cell::WALL);
        }
        assert!(matches!(expert_actions(&s), Err(SolveError::Unreachable(_))));
    }
}
