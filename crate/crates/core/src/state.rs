//! Fully observable grid snapshots.
//!
//! A [`GridState`] is the `(height, width, 3)` cell array of a gridworld plus
//! the instruction text. The agent is stored in the array as an object with
//! its facing direction in the `extra` channel. Two pieces of information do
//! not fit in the array and are carried alongside it: the object the agent
//! holds, and the cell hidden underneath the agent (an open door the agent is
//! standing in, for instance).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("unknown object code {0}")]
    UnknownObject(u8),
    #[error("unknown color code {0}")]
    UnknownColor(u8),
    #[error("unknown object name {0:?}")]
    UnknownObjectName(String),
    #[error("unknown color name {0:?}")]
    UnknownColorName(String),
    #[error("expected exactly one agent cell, found {0}")]
    AgentCount(usize),
    #[error("cell ({row}, {col}) has extra {extra} out of range for {object}")]
    ExtraOutOfRange {
        row: usize,
        col: usize,
        object: ObjectKind,
        extra: u8,
    },
    #[error("cell array is {got} long, expected {width}x{height}")]
    Shape {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("ragged cell rows")]
    Ragged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ObjectKind {
    Empty = 0,
    Wall = 1,
    Floor = 2,
    Door = 3,
    Key = 4,
    Ball = 5,
    Box = 6,
    GoalTile = 7,
    Agent = 8,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 9] = [
        ObjectKind::Empty,
        ObjectKind::Wall,
        ObjectKind::Floor,
        ObjectKind::Door,
        ObjectKind::Key,
        ObjectKind::Ball,
        ObjectKind::Box,
        ObjectKind::GoalTile,
        ObjectKind::Agent,
    ];

    /// Objects the agent can pick up.
    pub const CARRYABLE: [ObjectKind; 3] = [ObjectKind::Key, ObjectKind::Ball, ObjectKind::Box];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, StateError> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(StateError::UnknownObject(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Empty => "empty",
            ObjectKind::Wall => "wall",
            ObjectKind::Floor => "floor",
            ObjectKind::Door => "door",
            ObjectKind::Key => "key",
            ObjectKind::Ball => "ball",
            ObjectKind::Box => "box",
            ObjectKind::GoalTile => "goal_tile",
            ObjectKind::Agent => "agent",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, StateError> {
        Self::ALL
            .iter()
            .copied()
            .find(|o| o.name() == name)
            .ok_or_else(|| StateError::UnknownObjectName(name.to_string()))
    }

    pub fn is_carryable(self) -> bool {
        Self::CARRYABLE.contains(&self)
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Color {
    Red = 0,
    Green = 1,
    Blue = 2,
    Purple = 3,
    Yellow = 4,
    Grey = 5,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, StateError> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(StateError::UnknownColor(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, StateError> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| StateError::UnknownColorName(name.to_string()))
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Door states stored in the `extra` channel.
pub mod door {
    pub const OPEN: u8 = 0;
    pub const CLOSED: u8 = 1;
    pub const LOCKED: u8 = 2;
}

/// Facing directions stored in the agent cell's `extra` channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    pub fn from_code(code: u8) -> Direction {
        match code % 4 {
            0 => Direction::East,
            1 => Direction::South,
            2 => Direction::West,
            _ => Direction::North,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// `(dx, dy)` with `y` growing downwards.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }

    pub fn left(self) -> Direction {
        Direction::from_code(self.code() + 3)
    }

    pub fn right(self) -> Direction {
        Direction::from_code(self.code() + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::East => "right",
            Direction::South => "down",
            Direction::West => "left",
            Direction::North => "up",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub object: ObjectKind,
    pub color: Color,
    pub extra: u8,
}

impl Cell {
    pub const EMPTY: Cell = Cell {
        object: ObjectKind::Empty,
        color: Color::Red,
        extra: 0,
    };

    pub const WALL: Cell = Cell {
        object: ObjectKind::Wall,
        color: Color::Grey,
        extra: 0,
    };

    pub fn new(object: ObjectKind, color: Color, extra: u8) -> Self {
        Cell {
            object,
            color,
            extra,
        }
    }

    pub fn object(object: ObjectKind, color: Color) -> Self {
        Cell::new(object, color, 0)
    }

    pub fn door(color: Color, state: u8) -> Self {
        Cell::new(ObjectKind::Door, color, state)
    }

    pub fn triple(self) -> [u8; 3] {
        [self.object.code(), self.color.code(), self.extra]
    }

    pub fn from_triple(t: [u8; 3]) -> Result<Self, StateError> {
        Ok(Cell {
            object: ObjectKind::from_code(t[0])?,
            color: Color::from_code(t[1])?,
            extra: t[2],
        })
    }

    /// Cells the agent may occupy.
    pub fn is_passable(self) -> bool {
        match self.object {
            ObjectKind::Empty | ObjectKind::Floor | ObjectKind::GoalTile => true,
            ObjectKind::Door => self.extra == door::OPEN,
            _ => false,
        }
    }

    fn max_extra(self) -> u8 {
        match self.object {
            ObjectKind::Agent => 3,
            ObjectKind::Door => 2,
            _ => 0,
        }
    }
}

/// Grid coordinates: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x: i64,
    pub y: i64,
}

impl Pos {
    pub fn new(x: i64, y: i64) -> Self {
        Pos { x, y }
    }

    pub fn step(self, dir: Direction) -> Pos {
        let (dx, dy) = dir.delta();
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Pos) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

/// Identity of a state for set membership: everything except `step_index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    width: usize,
    height: usize,
    cells: Vec<u8>,
    carrying: Option<(u8, u8)>,
    under_agent: [u8; 3],
    instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    /// Row-major, `height * width` cells.
    pub cells: Vec<Cell>,
    pub instruction: String,
    pub step_index: usize,
    pub carrying: Option<(ObjectKind, Color)>,
    pub under_agent: Cell,
}

impl GridState {
    /// An empty grid with the agent at `agent` facing `dir`.
    pub fn blank(width: usize, height: usize, agent: Pos, dir: Direction) -> Self {
        let mut state = GridState {
            width,
            height,
            cells: vec![Cell::EMPTY; width * height],
            instruction: String::new(),
            step_index: 0,
            carrying: None,
            under_agent: Cell::EMPTY,
        };
        state.set(agent, Cell::new(ObjectKind::Agent, Color::Red, dir.code()));
        state
    }

    /// An empty room enclosed by walls, agent at `agent`.
    pub fn walled(width: usize, height: usize, agent: Pos, dir: Direction) -> Self {
        let mut state = Self::blank(width, height, agent, dir);
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                if x == 0 || y == 0 || x == width as i64 - 1 || y == height as i64 - 1 {
                    state.set(Pos::new(x, y), Cell::WALL);
                }
            }
        }
        state
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = instruction.into();
        self
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn get(&self, p: Pos) -> Option<Cell> {
        if self.in_bounds(p) {
            Some(self.cells[p.y as usize * self.width + p.x as usize])
        } else {
            None
        }
    }

    /// Panics when `p` is off the grid.
    pub fn set(&mut self, p: Pos, cell: Cell) {
        assert!(self.in_bounds(p), "position {p:?} off grid");
        let idx = p.y as usize * self.width + p.x as usize;
        self.cells[idx] = cell;
    }

    /// The cell at `p` with the agent lifted off: what lies under the agent.
    pub fn ground(&self, p: Pos) -> Option<Cell> {
        let cell = self.get(p)?;
        Some(if cell.object == ObjectKind::Agent {
            self.under_agent
        } else {
            cell
        })
    }

    pub fn agent_pos(&self) -> Pos {
        let idx = self
            .cells
            .iter()
            .position(|c| c.object == ObjectKind::Agent)
            .expect("state has no agent");
        Pos::new((idx % self.width) as i64, (idx / self.width) as i64)
    }

    pub fn agent_dir(&self) -> Direction {
        let p = self.agent_pos();
        Direction::from_code(self.get(p).map(|c| c.extra).unwrap_or(0))
    }

    pub fn front_pos(&self) -> Pos {
        self.agent_pos().step(self.agent_dir())
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height as i64).flat_map(move |y| (0..self.width as i64).map(move |x| Pos::new(x, y)))
    }

    /// Positions of every `(object, color)` match on the ground layer.
    pub fn find(&self, object: ObjectKind, color: Option<Color>) -> Vec<Pos> {
        self.positions()
            .filter(|&p| {
                let c = self.ground(p).unwrap();
                c.object == object && color.map_or(true, |col| c.color == col)
            })
            .collect()
    }

    pub fn key(&self) -> StateKey {
        StateKey {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().flat_map(|c| c.triple()).collect(),
            carrying: self.carrying.map(|(o, c)| (o.code(), c.code())),
            under_agent: self.under_agent.triple(),
            instruction: self.instruction.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if self.cells.len() != self.width * self.height {
            return Err(StateError::Shape {
                width: self.width,
                height: self.height,
                got: self.cells.len(),
            });
        }
        let agents = self
            .cells
            .iter()
            .filter(|c| c.object == ObjectKind::Agent)
            .count();
        if agents != 1 {
            return Err(StateError::AgentCount(agents));
        }
        for (idx, cell) in self.cells.iter().enumerate() {
            if cell.extra > cell.max_extra() {
                return Err(StateError::ExtraOutOfRange {
                    row: idx / self.width,
                    col: idx % self.width,
                    object: cell.object,
                    extra: cell.extra,
                });
            }
        }
        if self.under_agent.object == ObjectKind::Agent
            || self.under_agent.extra > self.under_agent.max_extra()
        {
            return Err(StateError::ExtraOutOfRange {
                row: 0,
                col: 0,
                object: self.under_agent.object,
                extra: self.under_agent.extra,
            });
        }
        Ok(())
    }

    /// Cells as nested `[row][col] = [object, color, extra]` arrays.
    pub fn cell_rows(&self) -> Vec<Vec<[u8; 3]>> {
        self.cells
            .chunks(self.width)
            .map(|row| row.iter().map(|c| c.triple()).collect())
            .collect()
    }

    pub fn from_cell_rows(rows: &[Vec<[u8; 3]>]) -> Result<(usize, usize, Vec<Cell>), StateError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(StateError::Ragged);
        }
        let cells = rows
            .iter()
            .flatten()
            .map(|&t| Cell::from_triple(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((width, height, cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enum_tables_round_trip() {
        for o in ObjectKind::ALL {
            assert_eq!(ObjectKind::from_code(o.code()).unwrap(), o);
            assert_eq!(ObjectKind::from_name(o.name()).unwrap(), o);
        }
        for c in Color::ALL {
            assert_eq!(Color::from_code(c.code()).unwrap(), c);
        }
        assert!(ObjectKind::from_code(9).is_err());
        assert!(Color::from_code(6).is_err());
    }

    #[test]
    fn identity_ignores_step_index() {
        let a = GridState::walled(5, 5, Pos::new(2, 2), Direction::East);
        let mut b = a.clone();
        b.step_index = 7;
        assert_eq!(a.key(), b.key());
        b.carrying = Some((ObjectKind::Ball, Color::Red));
        assert_ne!(a.key(), b.key());
    }

    #[test]
    fn validate_rejects_two_agents_and_bad_extra() {
        let mut s = GridState::blank(4, 4, Pos::new(0, 0), Direction::East);
        assert!(s.validate().is_ok());
        s.set(Pos::new(1, 1), Cell::new(ObjectKind::Agent, Color::Red, 0));
        assert_eq!(s.validate(), Err(StateError::AgentCount(2)));
        let mut s = GridState::blank(4, 4, Pos::new(0, 0), Direction::East);
        s.set(Pos::new(2, 2), Cell::new(ObjectKind::Ball, Color::Red, 1));
        assert!(matches!(s.validate(), Err(StateError::ExtraOutOfRange { .. })));
    }

    #[test]
    fn rotations_compose() {
        for code in 0..4 {
            let d = Direction::from_code(code);
            assert_eq!(d.left().right(), d);
            assert_eq!(d.left().left().left().left(), d);
        }
    }
}
