use std::fmt;

use super::ast::format_number;
use super::builtins::Ty;
use crate::state::Pos;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Str(String),
    Pos(Pos),
    List(Vec<Value>),
    /// The state under evaluation; programs can only pass it to accessors.
    State,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Pos(_) => "position",
            Value::List(_) => "list",
            Value::State => "state",
        }
    }

    pub fn fits(&self, ty: &Ty) -> bool {
        matches!(
            (self, ty),
            (_, Ty::Any)
                | (Value::Num(_), Ty::Num)
                | (Value::Bool(_), Ty::Bool)
                | (Value::Str(_), Ty::Str)
                | (Value::Pos(_), Ty::Pos)
                | (Value::List(_), Ty::List | Ty::PosList)
                | (Value::State, Ty::State)
        )
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => f.write_str(&format_number(*n)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(s),
            Value::Pos(p) => write!(f, "({}, {})", p.x, p.y),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::State => f.write_str("<state>"),
        }
    }
}
