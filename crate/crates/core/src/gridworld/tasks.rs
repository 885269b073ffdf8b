use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EnvError;
use crate::state::{door, Cell, Color, Direction, GridState, ObjectKind, Pos};

pub const TASK_IDS: [&str; 9] = [
    "GoToObj",
    "GoToRedBall",
    "OpenDoorColor",
    "OpenTwoDoors",
    "PickupDist",
    "PlaceBetween",
    "OpenMatchingDoor",
    "SortColors",
    "MultiTask",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    GoToObj,
    GoToRedBall,
    OpenDoorColor,
    OpenTwoDoors,
    PickupDist,
    PlaceBetween,
    OpenMatchingDoor,
    SortColors,
    /// Samples one of the single tasks per episode; the instruction says which.
    MultiTask,
}

impl TaskKind {
    pub const SINGLE: [TaskKind; 8] = [
        TaskKind::GoToObj,
        TaskKind::GoToRedBall,
        TaskKind::OpenDoorColor,
        TaskKind::OpenTwoDoors,
        TaskKind::PickupDist,
        TaskKind::PlaceBetween,
        TaskKind::OpenMatchingDoor,
        TaskKind::SortColors,
    ];

    pub fn from_id(id: &str) -> Result<TaskKind, EnvError> {
        let kind = match id {
            "GoToObj" => TaskKind::GoToObj,
            "GoToRedBall" => TaskKind::GoToRedBall,
            "OpenDoorColor" => TaskKind::OpenDoorColor,
            "OpenTwoDoors" => TaskKind::OpenTwoDoors,
            "PickupDist" => TaskKind::PickupDist,
            "PlaceBetween" => TaskKind::PlaceBetween,
            "OpenMatchingDoor" => TaskKind::OpenMatchingDoor,
            "SortColors" => TaskKind::SortColors,
            "MultiTask" => TaskKind::MultiTask,
            other => return Err(EnvError::UnknownTask(other.to_string())),
        };
        Ok(kind)
    }

    pub fn id(self) -> &'static str {
        TASK_IDS[Self::SINGLE.iter().position(|&k| k == self).unwrap_or(8)]
    }

    pub fn instruction_template(self) -> &'static str {
        match self {
            TaskKind::GoToObj => "go to the {color} {object}",
            TaskKind::GoToRedBall => "go to the red ball",
            TaskKind::OpenDoorColor => "open the {color} door",
            TaskKind::OpenTwoDoors => "open the {color} door, then open the {color} door",
            TaskKind::PickupDist => "pick up the {color} {object}",
            TaskKind::PlaceBetween => "put the {color} {object} between the {color} {object} and the {color} {object}",
            TaskKind::OpenMatchingDoor => "open the door matching the key",
            TaskKind::SortColors => "put the red ball in the right room and put the blue ball in the left room",
            TaskKind::MultiTask => "<any of the above>",
        }
    }

    pub fn generate(self, size: usize, rng: &mut ChaCha8Rng) -> GridState {
        match self {
            TaskKind::GoToObj => gen_goto_obj(size, rng),
            TaskKind::GoToRedBall => gen_goto_red_ball(size, rng),
            TaskKind::OpenDoorColor => gen_open_door(size, rng, 1),
            TaskKind::OpenTwoDoors => gen_open_door(size, rng, 2),
            TaskKind::PickupDist => gen_pickup(size, rng),
            TaskKind::PlaceBetween => gen_place_between(size, rng),
            TaskKind::OpenMatchingDoor => gen_open_matching(size, rng),
            TaskKind::SortColors => gen_sort_colors(size, rng),
            TaskKind::MultiTask => {
                let kind = *Self::SINGLE.choose(rng).unwrap();
                kind.generate(size, rng)
            }
        }
    }
}

/// What an instruction asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    GoTo(ObjectKind, Color),
    OpenDoor(Color),
    OpenTwo(Color, Color),
    Pickup(ObjectKind, Color),
    PlaceBetween {
        target: (ObjectKind, Color),
        a: (ObjectKind, Color),
        b: (ObjectKind, Color),
    },
    OpenMatching,
    SortColors,
}

fn parse_thing(color: &str, object: &str) -> Option<(ObjectKind, Color)> {
    Some((ObjectKind::from_name(object).ok()?, Color::from_name(color).ok()?))
}

impl Goal {
    pub fn parse(instruction: &str) -> Option<Goal> {
        let words: Vec<&str> = instruction
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|w| !w.is_empty())
            .collect();
        match words.as_slice() {
            ["go", "to", "the", c, o] => parse_thing(c, o).map(|(o, c)| Goal::GoTo(o, c)),
            ["open", "the", "door", "matching", "the", "key"] => Some(Goal::OpenMatching),
            ["open", "the", c1, "door", "then", "open", "the", c2, "door"] => Some(Goal::OpenTwo(
                Color::from_name(c1).ok()?,
                Color::from_name(c2).ok()?,
            )),
            ["open", "the", c, "door"] => Color::from_name(c).ok().map(Goal::OpenDoor),
            ["pick", "up", "the", c, o] => parse_thing(c, o).map(|(o, c)| Goal::Pickup(o, c)),
            ["put", "the", tc, to, "between", "the", ac, ao, "and", "the", bc, bo] => Some(Goal::PlaceBetween {
                target: parse_thing(tc, to)?,
                a: parse_thing(ac, ao)?,
                b: parse_thing(bc, bo)?,
            }),
            ["put", "the", "red", "ball", "in", "the", "right", "room", "and", "put", "the", "blue", "ball", "in", "the", "left", "room"] => {
                Some(Goal::SortColors)
            }
            _ => None,
        }
    }

    pub fn satisfied(&self, s: &GridState) -> bool {
        match *self {
            Goal::GoTo(o, c) => s
                .get(s.front_pos())
                .is_some_and(|cell| cell.object == o && cell.color == c),
            Goal::OpenDoor(c) => door_open(s, c),
            Goal::OpenTwo(a, b) => door_open(s, a) && door_open(s, b),
            Goal::Pickup(o, c) => s.carrying == Some((o, c)),
            Goal::PlaceBetween { target, a, b } => {
                let find = |(o, c)| s.find(o, Some(c));
                let (t, pa, pb) = (find(target), find(a), find(b));
                t.iter().any(|&t| {
                    pa.iter()
                        .any(|&pa| pb.iter().any(|&pb| strictly_between(t, pa, pb)))
                })
            }
            Goal::OpenMatching => key_color(s).is_some_and(|c| door_open(s, c)),
            Goal::SortColors => {
                let Some(div) = divider_column(s) else {
                    return false;
                };
                let red = s.find(ObjectKind::Ball, Some(Color::Red));
                let blue = s.find(ObjectKind::Ball, Some(Color::Blue));
                red.len() == 1
                    && blue.len() == 1
                    && red[0].x > div
                    && blue[0].x < div
            }
        }
    }
}

/// `t` lies on the segment between `a` and `b`, sharing their row or column,
/// and is neither endpoint.
pub(crate) fn strictly_between(t: Pos, a: Pos, b: Pos) -> bool {
    if a.y == b.y && t.y == a.y {
        t.x > a.x.min(b.x) && t.x < a.x.max(b.x)
    } else if a.x == b.x && t.x == a.x {
        t.y > a.y.min(b.y) && t.y < a.y.max(b.y)
    } else {
        false
    }
}

fn door_open(s: &GridState, color: Color) -> bool {
    s.positions().any(|p| {
        let c = s.ground(p).unwrap();
        c.object == ObjectKind::Door && c.color == color && c.extra == door::OPEN
    })
}

fn key_color(s: &GridState) -> Option<Color> {
    if let Some((ObjectKind::Key, c)) = s.carrying {
        return Some(c);
    }
    s.positions()
        .map(|p| s.ground(p).unwrap())
        .find(|c| c.object == ObjectKind::Key)
        .map(|c| c.color)
}

/// The interior column that is entirely wall or door, splitting the grid into
/// a left and a right room.
pub fn divider_column(s: &GridState) -> Option<i64> {
    (1..s.width as i64 - 1).find(|&x| {
        (1..s.height as i64 - 1).all(|y| {
            let c = s.ground(Pos::new(x, y)).unwrap();
            matches!(c.object, ObjectKind::Wall | ObjectKind::Door)
        })
    })
}

/// Ground-truth success of a state under its own instruction.
pub fn success(s: &GridState) -> bool {
    Goal::parse(&s.instruction).is_some_and(|g| g.satisfied(s))
}

/// Opening the second door of an ordered pair before the first.
pub(crate) fn violates_order(prev: &GridState, next: &GridState) -> bool {
    match Goal::parse(&next.instruction) {
        Some(Goal::OpenTwo(first, second)) => {
            !door_open(prev, second) && door_open(next, second) && !door_open(next, first)
        }
        _ => false,
    }
}

fn interior(size: usize) -> Vec<Pos> {
    let n = size as i64;
    (1..n - 1)
        .flat_map(|y| (1..n - 1).map(move |x| Pos::new(x, y)))
        .collect()
}

fn random_dir(rng: &mut ChaCha8Rng) -> Direction {
    Direction::from_code(rng.gen_range(0..4))
}

fn room_with_agent(size: usize, free: &mut Vec<Pos>, rng: &mut ChaCha8Rng) -> GridState {
    let idx = rng.gen_range(0..free.len());
    let agent = free.swap_remove(idx);
    GridState::walled(size, size, agent, random_dir(rng))
}

fn take(free: &mut Vec<Pos>, rng: &mut ChaCha8Rng) -> Pos {
    let idx = rng.gen_range(0..free.len());
    free.swap_remove(idx)
}

fn random_thing(rng: &mut ChaCha8Rng) -> (ObjectKind, Color) {
    (
        *ObjectKind::CARRYABLE.choose(rng).unwrap(),
        *Color::ALL.choose(rng).unwrap(),
    )
}

fn gen_goto_obj(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let mut free = interior(size);
    let (o, c) = random_thing(rng);
    let obj = take(&mut free, rng);
    let mut s = room_with_agent(size, &mut free, rng);
    s.set(obj, Cell::object(o, c));
    s.with_instruction(format!("go to the {c} {o}"))
}

fn gen_goto_red_ball(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let mut free = interior(size);
    let ball = take(&mut free, rng);
    let mut s = room_with_agent(size, &mut free, rng);
    s.set(ball, Cell::object(ObjectKind::Ball, Color::Red));
    for _ in 0..2 {
        let thing = loop {
            let t = random_thing(rng);
            if t != (ObjectKind::Ball, Color::Red) {
                break t;
            }
        };
        let p = take(&mut free, rng);
        s.set(p, Cell::object(thing.0, thing.1));
    }
    s.with_instruction("go to the red ball")
}

/// Non-corner wall cells, at most one door per wall side.
fn door_slots(size: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Pos> {
    let n = size as i64;
    let mut sides = [0, 1, 2, 3];
    sides.shuffle(rng);
    sides[..count]
        .iter()
        .map(|&side| {
            let k = rng.gen_range(1..n - 1);
            match side {
                0 => Pos::new(k, 0),
                1 => Pos::new(n - 1, k),
                2 => Pos::new(k, n - 1),
                _ => Pos::new(0, k),
            }
        })
        .collect()
}

fn distinct_colors(count: usize, rng: &mut ChaCha8Rng) -> Vec<Color> {
    let mut colors = Color::ALL.to_vec();
    colors.shuffle(rng);
    colors.truncate(count);
    colors
}

fn gen_open_door(size: usize, rng: &mut ChaCha8Rng, targets: usize) -> GridState {
    let mut free = interior(size);
    let mut s = room_with_agent(size, &mut free, rng);
    let n_doors = if targets == 1 { rng.gen_range(2..=3) } else { 2 };
    let colors = distinct_colors(n_doors, rng);
    for (p, &c) in door_slots(size, n_doors, rng).into_iter().zip(&colors) {
        s.set(p, Cell::door(c, door::CLOSED));
    }
    let instruction = if targets == 1 {
        format!("open the {} door", colors.choose(rng).unwrap())
    } else {
        format!("open the {} door, then open the {} door", colors[0], colors[1])
    };
    s.with_instruction(instruction)
}

fn gen_pickup(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let mut free = interior(size);
    let mut s = room_with_agent(size, &mut free, rng);
    let mut things: Vec<(ObjectKind, Color)> = Vec::new();
    while things.len() < 3 {
        let t = random_thing(rng);
        if !things.contains(&t) {
            things.push(t);
        }
    }
    for &(o, c) in &things {
        let p = take(&mut free, rng);
        s.set(p, Cell::object(o, c));
    }
    let (o, c) = things[rng.gen_range(0..things.len())];
    s.with_instruction(format!("pick up the {c} {o}"))
}

fn gen_place_between(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let n = size as i64;
    loop {
        let colors = distinct_colors(3, rng);
        // anchors share a row or column with at least one free cell between them
        let horizontal = rng.gen_bool(0.5);
        let line = rng.gen_range(1..n - 1);
        let lo = rng.gen_range(1..n - 3);
        let hi = rng.gen_range(lo + 2..n - 1);
        let (pa, pb) = if horizontal {
            (Pos::new(lo, line), Pos::new(hi, line))
        } else {
            (Pos::new(line, lo), Pos::new(line, hi))
        };
        let mut free: Vec<Pos> = interior(size)
            .into_iter()
            .filter(|&p| p != pa && p != pb && !strictly_between(p, pa, pb))
            .collect();
        if free.len() < 2 {
            continue;
        }
        let target = take(&mut free, rng);
        let mut s = room_with_agent(size, &mut free, rng);
        s.set(pa, Cell::object(ObjectKind::Ball, colors[1]));
        s.set(pb, Cell::object(ObjectKind::Ball, colors[2]));
        s.set(target, Cell::object(ObjectKind::Ball, colors[0]));
        return s.with_instruction(format!(
            "put the {} ball between the {} ball and the {} ball",
            colors[0], colors[1], colors[2]
        ));
    }
}

fn gen_open_matching(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let mut free = interior(size);
    let key = take(&mut free, rng);
    let mut s = room_with_agent(size, &mut free, rng);
    let n_doors = rng.gen_range(2..=3);
    let colors = distinct_colors(n_doors, rng);
    for (p, &c) in door_slots(size, n_doors, rng).into_iter().zip(&colors) {
        s.set(p, Cell::door(c, door::CLOSED));
    }
    let key_color = *colors.choose(rng).unwrap();
    s.set(key, Cell::object(ObjectKind::Key, key_color));
    s.with_instruction("open the door matching the key")
}

fn gen_sort_colors(size: usize, rng: &mut ChaCha8Rng) -> GridState {
    let n = size as i64;
    let div = n / 2;
    let left: Vec<Pos> = interior(size).into_iter().filter(|p| p.x < div).collect();
    let right: Vec<Pos> = interior(size).into_iter().filter(|p| p.x > div).collect();
    let door_y = rng.gen_range(1..n - 1);
    let mut left_free = left.clone();
    let mut right_free = right.clone();
    // keep the cells flanking the door clear
    left_free.retain(|&p| p != Pos::new(div - 1, door_y));
    right_free.retain(|&p| p != Pos::new(div + 1, door_y));
    let red = take(&mut left_free, rng);
    let blue = take(&mut right_free, rng);
    let mut spots: Vec<Pos> = left_free.into_iter().chain(right_free).collect();
    let mut s = room_with_agent(size, &mut spots, rng);
    for y in 1..n - 1 {
        s.set(Pos::new(div, y), Cell::WALL);
    }
    s.set(Pos::new(div, door_y), Cell::door(Color::Yellow, door::OPEN));
    s.set(red, Cell::object(ObjectKind::Ball, Color::Red));
    s.set(blue, Cell::object(ObjectKind::Ball, Color::Blue));
    s.with_instruction("put the red ball in the right room and put the blue ball in the left room")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn instructions_parse_back_to_goals() {
        for (i, kind) in TaskKind::SINGLE.iter().enumerate() {
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + i as u64);
                let s = kind.generate(7, &mut rng);
                assert!(s.validate().is_ok(), "{kind:?}");
                assert!(Goal::parse(&s.instruction).is_some(), "{}", s.instruction);
            }
        }
    }

    #[test]
    fn open_matching_door_layout() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = TaskKind::OpenMatchingDoor.generate(6, &mut rng);
            let keys = s.find(ObjectKind::Key, None);
            assert_eq!(keys.len(), 1);
            let doors: Vec<Cell> = s
                .find(ObjectKind::Door, None)
                .into_iter()
                .map(|p| s.get(p).unwrap())
                .collect();
            assert!(doors.len() >= 2);
            let mut colors: Vec<Color> = doors.iter().map(|d| d.color).collect();
            colors.dedup();
            assert_eq!(colors.len(), doors.len());
            let key = s.get(keys[0]).unwrap();
            assert_eq!(doors.iter().filter(|d| d.color == key.color).count(), 1);
        }
    }

    #[test]
    fn sort_colors_starts_swapped() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = TaskKind::SortColors.generate(7, &mut rng);
            let div = divider_column(&s).unwrap();
            assert!(s.find(ObjectKind::Ball, Some(Color::Red))[0].x < div);
            assert!(s.find(ObjectKind::Ball, Some(Color::Blue))[0].x > div);
            assert!(!success(&s));
        }
    }

    #[test]
    fn between_is_strict_and_collinear() {
        let a = Pos::new(1, 2);
        let b = Pos::new(4, 2);
        assert!(strictly_between(Pos::new(2, 2), a, b));
        assert!(strictly_between(Pos::new(3, 2), b, a));
        assert!(!strictly_between(Pos::new(1, 2), a, b));
        assert!(!strictly_between(Pos::new(2, 3), a, b));
        assert!(!strictly_between(Pos::new(5, 2), a, b));
    }

    #[test]
    fn open_two_doors_order() {
        let mut s = GridState::walled(6, 6, Pos::new(2, 2), Direction::East)
            .with_instruction("open the red door, then open the blue door");
        s.set(Pos::new(5, 2), Cell::door(Color::Red, door::CLOSED));
        s.set(Pos::new(2, 5), Cell::door(Color::Blue, door::CLOSED));
        let mut wrong = s.clone();
        wrong.set(Pos::new(2, 5), Cell::door(Color::Blue, door::OPEN));
        assert!(violates_order(&s, &wrong));
        let mut first = s.clone();
        first.set(Pos::new(5, 2), Cell::door(Color::Red, door::OPEN));
        assert!(!violates_order(&s, &first));
        let mut both = first.clone();
        both.set(Pos::new(2, 5), Cell::door(Color::Blue, door::OPEN));
        assert!(!violates_order(&first, &both));
        assert!(success(&both));
        assert!(!success(&first));
    }
}
