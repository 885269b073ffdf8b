//! The predicate library used by the rule-based mutator.
//!
//! Templates are phrased over the environment's vocabulary (objects, colors,
//! doors, rooms) and take their arguments from states the mutator is shown,
//! never from knowledge of a particular task.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsl::{parse_unchecked, Expr, Function};
use crate::state::{Color, GridState, ObjectKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Object,
    Color,
    Side,
}

pub struct Template {
    pub name: &'static str,
    pub params: &'static [Param],
    pub source: &'static str,
    /// Index of the (object, color) argument pair to approach when shaping.
    /// `None` for templates without a spatial target.
    pub target: Option<(Option<usize>, usize)>,
}

pub const TEMPLATES: &[Template] = &[
    Template {
        name: "agent_adjacent_to",
        params: &[Param::Object, Param::Color],
        source: "fn agent_adjacent_to(s, obj, color) {
    for p in find_all(s, obj, color) {
        if adjacent(p, agent_pos(s)) { return true }
    }
    return false
}",
        target: Some((Some(0), 1)),
    },
    Template {
        name: "agent_faces",
        params: &[Param::Object, Param::Color],
        source: "fn agent_faces(s, obj, color) {
    for p in find_all(s, obj, color) {
        if p == front_pos(s) { return true }
    }
    return false
}",
        target: Some((Some(0), 1)),
    },
    Template {
        name: "door_open",
        params: &[Param::Color],
        source: "fn door_open(s, color) {
    for p in find_all(s, \"door\", color) {
        if is_open(s, p) { return true }
    }
    return false
}",
        target: Some((None, 0)),
    },
    Template {
        name: "is_carrying",
        params: &[Param::Object, Param::Color],
        source: "fn is_carrying(s, obj, color) {
    if carrying(s) == \"none\" { return false }
    return (obj == \"any\" || carrying(s) == obj) && (color == \"any\" || carrying_color(s) == color)
}",
        target: Some((Some(0), 1)),
    },
    Template {
        name: "collinear_between",
        params: &[Param::Object, Param::Color, Param::Object, Param::Color, Param::Object, Param::Color],
        source: "fn collinear_between(s, obj, color, obj_a, color_a, obj_b, color_b) {
    for t in find_all(s, obj, color) {
        for a in find_all(s, obj_a, color_a) {
            for b in find_all(s, obj_b, color_b) {
                if t != a && t != b && a != b {
                    if a.x == b.x && t.x == a.x && (t.y - a.y) * (t.y - b.y) < 0.0 { return true }
                    if a.y == b.y && t.y == a.y && (t.x - a.x) * (t.x - b.x) < 0.0 { return true }
                }
            }
        }
    }
    return false
}",
        target: Some((Some(0), 1)),
    },
    Template {
        name: "agent_in_room",
        params: &[Param::Side],
        source: "fn agent_in_room(s, side) {
    return side_of(s, agent_pos(s)) == side
}",
        target: None,
    },
    Template {
        name: "object_in_room",
        params: &[Param::Object, Param::Color, Param::Side],
        source: "fn object_in_room(s, obj, color, side) {
    for p in find_all(s, obj, color) {
        if side_of(s, p) == side { return true }
    }
    return false
}",
        target: Some((Some(0), 1)),
    },
];

pub fn template(name: &str) -> Option<&'static Template> {
    TEMPLATES.iter().find(|t| t.name == name)
}

impl Template {
    pub fn function(&self) -> Function {
        parse_unchecked(self.source)
            .expect("template parses")
            .functions
            .remove(0)
    }
}

/// Object and color words available for template arguments, gathered from
/// the grids and instructions of reference states.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    pub objects: Vec<String>,
    pub colors: Vec<String>,
    /// Instruction slots `(is_color, k)` that resolve to a word.
    pub slots: Vec<(bool, usize)>,
}

fn instruction_words(instr: &str, color: bool) -> Vec<String> {
    instr
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.')
        .filter(|w| {
            if color {
                Color::from_name(w).is_ok()
            } else {
                ObjectKind::from_name(w).is_ok()
            }
        })
        .map(str::to_string)
        .collect()
}

impl Vocabulary {
    pub fn from_states<'a>(states: impl IntoIterator<Item = &'a GridState>) -> Self {
        let mut v = Vocabulary::default();
        for s in states {
            for p in s.positions() {
                let c = s.ground(p).unwrap();
                if matches!(c.object, ObjectKind::Empty | ObjectKind::Wall | ObjectKind::Floor | ObjectKind::Agent) {
                    continue;
                }
                push_unique(&mut v.objects, c.object.name());
                push_unique(&mut v.colors, c.color.name());
            }
            if let Some((o, c)) = s.carrying {
                push_unique(&mut v.objects, o.name());
                push_unique(&mut v.colors, c.name());
            }
            for (is_color, words) in [(true, instruction_words(&s.instruction, true)), (false, instruction_words(&s.instruction, false))] {
                for k in 0..words.len() {
                    if !v.slots.contains(&(is_color, k)) {
                        v.slots.push((is_color, k));
                    }
                }
            }
        }
        v
    }

    /// An argument expression of the given kind: an instruction slot with
    /// probability `slot_prob` when one exists, otherwise a word.
    pub fn sample(&self, kind: Param, slot_prob: f64, rng: &mut impl Rng) -> Expr {
        match kind {
            Param::Side => Expr::Num(if rng.gen_bool(0.5) { -1.0 } else { 1.0 }),
            Param::Object | Param::Color => {
                let is_color = kind == Param::Color;
                let slots: Vec<usize> = self
                    .slots
                    .iter()
                    .filter(|(c, _)| *c == is_color)
                    .map(|(_, k)| *k)
                    .collect();
                if !slots.is_empty() && rng.gen_bool(slot_prob) {
                    let k = *slots.choose(rng).unwrap();
                    return slot_expr(is_color, k);
                }
                let words = if is_color { &self.colors } else { &self.objects };
                if words.is_empty() || rng.gen_bool(0.2) {
                    Expr::str("any")
                } else {
                    Expr::str(words.choose(rng).unwrap())
                }
            }
        }
    }
}

fn push_unique(list: &mut Vec<String>, word: &str) {
    if !list.iter().any(|w| w == word) {
        list.push(word.to_string());
    }
}

pub fn slot_expr(is_color: bool, k: usize) -> Expr {
    let name = if is_color { "instr_color" } else { "instr_object" };
    Expr::call(name, vec![Expr::var("instr"), Expr::Num(k as f64)])
}

/// Whether `e` is an argument atom the mutator may swap: a word literal or
/// an instruction slot.
pub fn atom_kind(e: &Expr) -> Option<Param> {
    match e {
        Expr::Str(w) if w == "any" => Some(Param::Object),
        Expr::Str(w) if Color::from_name(w).is_ok() => Some(Param::Color),
        Expr::Str(w) if ObjectKind::from_name(w).is_ok() => Some(Param::Object),
        Expr::Call(name, args) if args.len() == 2 && name == "instr_color" => Some(Param::Color),
        Expr::Call(name, args) if args.len() == 2 && name == "instr_object" => Some(Param::Object),
        _ => None,
    }
}

/// A call of template `t` with arguments drawn from `vocab`.
pub fn instantiate(t: &Template, vocab: &Vocabulary, slot_prob: f64, rng: &mut impl Rng) -> Expr {
    let mut args = vec![Expr::var("s")];
    args.extend(t.params.iter().map(|&p| vocab.sample(p, slot_prob, rng)));
    Expr::call(t.name, args)
}
