//! Hand-coded state features for the linear policy.
//!
//! The policy sees the agent's surroundings in its own frame: where the
//! current instruction target lies (forward/right offset), what the cell in
//! front holds, and whether it carries something.

use crate::state::{door, Color, Direction, GridState, ObjectKind, Pos};

/// Offsets are clamped to this radius before one-hot encoding.
const RADIUS: i64 = 2;
const OFFSETS: usize = ((2 * RADIUS + 1) * (2 * RADIUS + 1)) as usize + 1;
const FRONT_KINDS: usize = 6;

/// Length of the feature vector.
pub const DIM: usize = OFFSETS * FRONT_KINDS + 2;

/// `(object, color)` pairs named by an instruction, in order; a color that
/// directly precedes an object word qualifies it.
pub fn instruction_targets(instruction: &str) -> Vec<(ObjectKind, Option<Color>)> {
    let words: Vec<&str> = instruction
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.')
        .filter(|w| !w.is_empty())
        .collect();
    let mut out = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if let Ok(o) = ObjectKind::from_name(w) {
            let color = i.checked_sub(1).and_then(|j| Color::from_name(words[j]).ok());
            out.push((o, color));
        }
    }
    out
}

/// Position of the first instruction target not yet dealt with: open doors
/// and carried objects are skipped.
pub fn active_target(s: &GridState) -> Option<Pos> {
    let agent = s.agent_pos();
    for (o, c) in instruction_targets(&s.instruction) {
        if o.is_carryable() && s.carrying.is_some_and(|(co, cc)| co == o && c.map_or(true, |c| c == cc)) {
            continue;
        }
        let mut found = s.find(o, c);
        if o == ObjectKind::Door {
            found.retain(|&p| s.get(p).is_some_and(|cell| cell.extra != door::OPEN));
        }
        if let Some(p) = found.into_iter().min_by_key(|p| (p.manhattan(agent), p.y, p.x)) {
            return Some(p);
        }
    }
    None
}

/// `p` relative to the agent as (forward, right).
fn egocentric(dir: Direction, agent: Pos, p: Pos) -> (i64, i64) {
    let (dx, dy) = (p.x - agent.x, p.y - agent.y);
    match dir {
        Direction::East => (dx, dy),
        Direction::South => (dy, -dx),
        Direction::West => (-dx, -dy),
        Direction::North => (-dy, dx),
    }
}

fn front_kind(s: &GridState) -> usize {
    match s.get(s.front_pos()) {
        None => 1,
        Some(c) => match c.object {
            ObjectKind::Empty | ObjectKind::Floor => 0,
            ObjectKind::Wall => 1,
            ObjectKind::Door if c.extra == door::OPEN => 2,
            ObjectKind::Door => 3,
            o if o.is_carryable() => 4,
            _ => 5,
        },
    }
}

/// Indices of the active (value 1) features; every other feature is 0.
pub fn active_features(s: &GridState) -> Vec<usize> {
    let agent = s.agent_pos();
    let offset = match active_target(s) {
        Some(p) => {
            let (f, r) = egocentric(s.agent_dir(), agent, p);
            let side = 2 * RADIUS + 1;
            ((f.clamp(-RADIUS, RADIUS) + RADIUS) * side + r.clamp(-RADIUS, RADIUS) + RADIUS) as usize
        }
        None => OFFSETS - 1,
    };
    let mut out = vec![offset * FRONT_KINDS + front_kind(s), OFFSETS * FRONT_KINDS];
    if s.carrying.is_some() {
        out.push(OFFSETS * FRONT_KINDS + 1);
    }
    out
}
