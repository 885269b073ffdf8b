//! The grid, instruction and arithmetic accessors exposed to reward programs.
//!
//! This table is the whole surface a program can touch: there is no I/O,
//! clock or global state reachable from the language.

use super::value::Value;
use super::EvalErrorKind;
use crate::gridworld::divider_column;
use crate::state::{door, Color, GridState, ObjectKind, Pos};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Num,
    Bool,
    Str,
    Pos,
    PosList,
    List,
    State,
    Any,
}

impl Ty {
    pub fn name(&self) -> &'static str {
        match self {
            Ty::Num => "number",
            Ty::Bool => "bool",
            Ty::Str => "string",
            Ty::Pos => "position",
            Ty::PosList => "list of positions",
            Ty::List => "list",
            Ty::State => "state",
            Ty::Any => "any",
        }
    }

    /// Whether a value of type `self` can flow where `want` is expected.
    pub fn fits(&self, want: &Ty) -> bool {
        match (self, want) {
            (Ty::Any, _) | (_, Ty::Any) => true,
            (Ty::PosList, Ty::List) => true,
            (a, b) => a == b,
        }
    }
}

pub struct Builtin {
    pub name: &'static str,
    pub params: &'static [Ty],
    pub ret: Ty,
    pub doc: &'static str,
}

macro_rules! builtins {
    ($($name:literal ($($p:ident),*) -> $ret:ident : $doc:literal;)*) => {
        pub const BUILTINS: &[Builtin] = &[
            $(Builtin { name: $name, params: &[$(Ty::$p),*], ret: Ty::$ret, doc: $doc },)*
        ];
    };
}

builtins! {
    "object_at"(State, Pos) -> Str : "object name in a cell (\"agent\" on the agent's cell, \"none\" off-grid)";
    "color_at"(State, Pos) -> Str : "color name in a cell (\"none\" for empty, agent and off-grid cells)";
    "extra_at"(State, Pos) -> Num : "state channel: door 0 open / 1 closed / 2 locked; agent direction";
    "is_open"(State, Pos) -> Bool : "true when the cell holds an open door, also under the agent";
    "find_all"(State, Str, Str) -> PosList : "positions of every object/color match; \"any\" matches all";
    "cells"(State) -> PosList : "every grid position, row-major";
    "width"(State) -> Num : "grid width";
    "height"(State) -> Num : "grid height";
    "agent_pos"(State) -> Pos : "agent position";
    "agent_dir"(State) -> Num : "agent direction: 0 right, 1 down, 2 left, 3 up";
    "front_pos"(State) -> Pos : "the cell the agent faces";
    "carrying"(State) -> Str : "carried object name or \"none\"";
    "carrying_color"(State) -> Str : "carried object color or \"none\"";
    "side_of"(State, Pos) -> Num : "-1 left of the room divider, 1 right of it, 0 otherwise";
    "manhattan"(Pos, Pos) -> Num : "manhattan distance";
    "adjacent"(Pos, Pos) -> Bool : "manhattan distance is exactly 1";
    "pos"(Num, Num) -> Pos : "position from x (column) and y (row)";
    "instr_token"(Str, Num) -> Str : "i-th word of the instruction or \"\"";
    "instr_contains"(Str, Str) -> Bool : "instruction contains the word";
    "instr_len"(Str) -> Num : "number of words in the instruction";
    "instr_color"(Str, Num) -> Str : "k-th color word in the instruction or \"none\"";
    "instr_object"(Str, Num) -> Str : "k-th object word in the instruction or \"none\"";
    "len"(List) -> Num : "list length";
    "abs"(Num) -> Num : "absolute value";
    "min"(Num, Num) -> Num : "minimum";
    "max"(Num, Num) -> Num : "maximum";
    "floor"(Num) -> Num : "round down";
}

pub fn lookup(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn words(instr: &str) -> Vec<&str> {
    instr
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.')
        .filter(|w| !w.is_empty())
        .collect()
}

fn none() -> Value {
    Value::Str("none".into())
}

type Out = Result<Value, (EvalErrorKind, String)>;

fn pos_arg(v: &Value) -> Result<Pos, (EvalErrorKind, String)> {
    match v {
        Value::Pos(p) => Ok(*p),
        other => Err((EvalErrorKind::Type, format!("expected position, got {}", other.type_name()))),
    }
}

fn num_arg(v: &Value) -> Result<f64, (EvalErrorKind, String)> {
    match v {
        Value::Num(n) => Ok(*n),
        other => Err((EvalErrorKind::Type, format!("expected number, got {}", other.type_name()))),
    }
}

fn str_arg(v: &Value) -> Result<&str, (EvalErrorKind, String)> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err((EvalErrorKind::Type, format!("expected string, got {}", other.type_name()))),
    }
}

fn int_arg(v: &Value) -> Result<i64, (EvalErrorKind, String)> {
    let n = num_arg(v)?;
    if n.fract() != 0.0 || !n.is_finite() {
        return Err((EvalErrorKind::Domain, format!("expected an integer, got {n}")));
    }
    Ok(n as i64)
}

/// Interpreter step cost of a call, before it runs.
pub fn cost(name: &str, state: &GridState) -> usize {
    match name {
        "find_all" | "cells" | "side_of" => 1 + state.width * state.height,
        _ => 1,
    }
}

pub fn call(name: &str, args: &[Value], s: &GridState) -> Out {
    let arg = |i: usize| &args[i];
    let v = match name {
        "object_at" => match s.get(pos_arg(arg(1))?) {
            Some(c) => Value::Str(c.object.name().into()),
            None => none(),
        },
        "color_at" => match s.get(pos_arg(arg(1))?) {
            Some(c) if !matches!(c.object, ObjectKind::Empty | ObjectKind::Agent) => Value::Str(c.color.name().into()),
            _ => none(),
        },
        "extra_at" => Value::Num(s.get(pos_arg(arg(1))?).map_or(0.0, |c| c.extra as f64)),
        "is_open" => Value::Bool(
            s.ground(pos_arg(arg(1))?)
                .is_some_and(|c| c.object == ObjectKind::Door && c.extra == door::OPEN),
        ),
        "find_all" => {
            let object = str_arg(arg(1))?;
            let color = str_arg(arg(2))?;
            let object = if object == "any" {
                None
            } else {
                match ObjectKind::from_name(object) {
                    Ok(o) => Some(o),
                    Err(_) => return Ok(Value::List(Vec::new())),
                }
            };
            let color = if color == "any" {
                None
            } else {
                match Color::from_name(color) {
                    Ok(c) => Some(c),
                    Err(_) => return Ok(Value::List(Vec::new())),
                }
            };
            Value::List(
                s.positions()
                    .filter(|&p| {
                        let c = s.ground(p).unwrap();
                        c.object != ObjectKind::Empty
                            && object.map_or(c.object != ObjectKind::Wall, |o| c.object == o)
                            && color.map_or(true, |col| c.color == col)
                    })
                    .map(Value::Pos)
                    .collect(),
            )
        }
        "cells" => Value::List(s.positions().map(Value::Pos).collect()),
        "width" => Value::Num(s.width as f64),
        "height" => Value::Num(s.height as f64),
        "agent_pos" => Value::Pos(s.agent_pos()),
        "agent_dir" => Value::Num(s.agent_dir().code() as f64),
        "front_pos" => Value::Pos(s.front_pos()),
        "carrying" => s.carrying.map_or_else(none, |(o, _)| Value::Str(o.name().into())),
        "carrying_color" => s.carrying.map_or_else(none, |(_, c)| Value::Str(c.name().into())),
        "side_of" => {
            let p = pos_arg(arg(1))?;
            Value::Num(match divider_column(s) {
                Some(div) => (p.x - div).signum() as f64,
                None => 0.0,
            })
        }
        "manhattan" => Value::Num(pos_arg(arg(0))?.manhattan(pos_arg(arg(1))?) as f64),
        "adjacent" => Value::Bool(pos_arg(arg(0))?.manhattan(pos_arg(arg(1))?) == 1),
        "pos" => Value::Pos(Pos::new(int_arg(arg(0))?, int_arg(arg(1))?)),
        "instr_token" => {
            let i = int_arg(arg(1))?;
            let w = words(str_arg(arg(0))?);
            Value::Str(if i >= 0 { w.get(i as usize).copied().unwrap_or("") } else { "" }.into())
        }
        "instr_contains" => {
            let word = str_arg(arg(1))?;
            Value::Bool(words(str_arg(arg(0))?).contains(&word))
        }
        "instr_len" => Value::Num(words(str_arg(arg(0))?).len() as f64),
        "instr_color" | "instr_object" => {
            let k = int_arg(arg(1))?;
            let found: Vec<&str> = words(str_arg(arg(0))?)
                .into_iter()
                .filter(|w| {
                    if name == "instr_color" {
                        Color::from_name(w).is_ok()
                    } else {
                        ObjectKind::from_name(w).is_ok()
                    }
                })
                .collect();
            if k >= 0 {
                found.get(k as usize).map_or_else(none, |w| Value::Str((*w).into()))
            } else {
                none()
            }
        }
        "len" => match arg(0) {
            Value::List(items) => Value::Num(items.len() as f64),
            other => return Err((EvalErrorKind::Type, format!("len of {}", other.type_name()))),
        },
        "abs" => Value::Num(num_arg(arg(0))?.abs()),
        "min" => Value::Num(num_arg(arg(0))?.min(num_arg(arg(1))?)),
        "max" => Value::Num(num_arg(arg(0))?.max(num_arg(arg(1))?)),
        "floor" => Value::Num(num_arg(arg(0))?.floor()),
        other => return Err((EvalErrorKind::Type, format!("unknown builtin {other}"))),
    };
    Ok(v)
}
