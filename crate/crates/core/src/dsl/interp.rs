//! Tree-walking evaluator with a step budget.

use std::collections::HashMap;

use super::ast::{BinOp, Block, Expr, Field, Function, Program, Stmt, UnOp};
use super::builtins;
use super::value::Value;
use super::{EvalErrorKind, ENTRY};
use crate::state::GridState;

type Fail = (EvalErrorKind, String);

enum Flow {
    Next,
    Return(Value),
}

pub(crate) struct Interp<'a> {
    functions: HashMap<&'a str, &'a Function>,
    state: &'a GridState,
    budget: usize,
    pub steps: usize,
    pub trace: Vec<String>,
    scopes: Vec<HashMap<String, Value>>,
}

impl<'a> Interp<'a> {
    pub fn new(program: &'a Program, state: &'a GridState, budget: usize) -> Self {
        Interp {
            functions: program.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
            state,
            budget,
            steps: 0,
            trace: Vec::new(),
            scopes: Vec::new(),
        }
    }

    fn tick(&mut self, n: usize) -> Result<(), Fail> {
        if self.steps + n > self.budget {
            self.steps = self.budget;
            Err((EvalErrorKind::StepBudgetExceeded, format!("exceeded {} steps", self.budget)))
        } else {
            self.steps += n;
            Ok(())
        }
    }

    pub fn run_entry(&mut self, instruction: &str) -> Result<Value, Fail> {
        self.call_user(ENTRY, vec![Value::State, Value::Str(instruction.to_string())])
    }

    fn call_user(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Fail> {
        let f = *self
            .functions
            .get(name)
            .ok_or_else(|| (EvalErrorKind::Type, format!("undefined function {name}")))?;
        if f.params.len() != args.len() {
            return Err((EvalErrorKind::Type, format!("{name} takes {} arguments", f.params.len())));
        }
        let saved = std::mem::take(&mut self.scopes);
        self.scopes.push(f.params.iter().cloned().zip(args).collect());
        let out = self.block(&f.body);
        self.scopes = saved;
        match out? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Err((EvalErrorKind::Type, format!("{name} ended without return"))),
        }
    }

    fn block(&mut self, block: &Block) -> Result<Flow, Fail> {
        self.scopes.push(HashMap::new());
        let mut out = Ok(Flow::Next);
        for stmt in block {
            match self.stmt(stmt) {
                Ok(Flow::Next) => {}
                other => {
                    out = other;
                    break;
                }
            }
        }
        self.scopes.pop();
        out
    }

    fn truthy(&self, v: Value, what: &str) -> Result<bool, Fail> {
        match v {
            Value::Bool(b) => Ok(b),
            other => Err((EvalErrorKind::Type, format!("{what} is {}, not bool", other.type_name()))),
        }
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, Fail> {
        self.tick(1)?;
        match stmt {
            Stmt::Let(name, e) => {
                let v = self.expr(e)?;
                self.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            Stmt::Assign(name, e) => {
                let v = self.expr(e)?;
                match self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name)) {
                    Some(slot) => *slot = v,
                    None => return Err((EvalErrorKind::Type, format!("assignment to undefined `{name}`"))),
                }
            }
            Stmt::If(c, then, other) => {
                let c = self.expr(c)?;
                if self.truthy(c, "if condition")? {
                    return self.block(then);
                } else if let Some(other) = other {
                    return self.block(other);
                }
            }
            Stmt::While(c, body) => loop {
                let cv = self.expr(c)?;
                if !self.truthy(cv, "while condition")? {
                    break;
                }
                if let Flow::Return(v) = self.block(body)? {
                    return Ok(Flow::Return(v));
                }
                self.tick(1)?;
            },
            Stmt::For(var, iter, body) => {
                let items = match self.expr(iter)? {
                    Value::List(items) => items,
                    other => return Err((EvalErrorKind::Type, format!("cannot iterate over {}", other.type_name()))),
                };
                for item in items {
                    self.scopes.push(HashMap::from([(var.clone(), item)]));
                    let flow = self.block(body);
                    self.scopes.pop();
                    if let Flow::Return(v) = flow? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick(1)?;
                }
            }
            Stmt::Return(e) => return Ok(Flow::Return(self.expr(e)?)),
            Stmt::Debug(es) => {
                let parts = es.iter().map(|e| self.expr(e).map(|v| v.to_string())).collect::<Result<Vec<_>, _>>()?;
                self.trace.push(parts.join(" "));
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
        }
        Ok(Flow::Next)
    }

    fn num(v: Value, what: &str) -> Result<f64, Fail> {
        match v {
            Value::Num(n) => Ok(n),
            other => Err((EvalErrorKind::Type, format!("{what} expects number, got {}", other.type_name()))),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Value, Fail> {
        self.tick(1)?;
        Ok(match e {
            Expr::Num(n) => Value::Num(*n),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Var(name) => self
                .scopes
                .iter()
                .rev()
                .find_map(|s| s.get(name))
                .cloned()
                .ok_or_else(|| (EvalErrorKind::Type, format!("undefined variable `{name}`")))?,
            Expr::List(items) => Value::List(items.iter().map(|i| self.expr(i)).collect::<Result<_, _>>()?),
            Expr::Field(inner, field) => match self.expr(inner)? {
                Value::Pos(p) => Value::Num(match field {
                    Field::X => p.x as f64,
                    Field::Y => p.y as f64,
                }),
                other => return Err((EvalErrorKind::Type, format!("field access on {}", other.type_name()))),
            },
            Expr::Index(list, idx) => {
                let list = self.expr(list)?;
                let idx = Self::num(self.expr(idx)?, "index")?;
                let Value::List(items) = list else {
                    return Err((EvalErrorKind::Type, format!("cannot index {}", list.type_name())));
                };
                if idx.fract() != 0.0 || idx < 0.0 || idx as usize >= items.len() {
                    return Err((EvalErrorKind::Domain, format!("index {idx} out of range for length {}", items.len())));
                }
                items[idx as usize].clone()
            }
            Expr::Unary(UnOp::Neg, inner) => Value::Num(-Self::num(self.expr(inner)?, "negation")?),
            Expr::Unary(UnOp::Not, inner) => {
                let v = self.expr(inner)?;
                Value::Bool(!self.truthy(v, "not")?)
            }
            Expr::Binary(BinOp::And, l, r) => {
                let lv = self.expr(l)?;
                if !self.truthy(lv, "&&")? {
                    Value::Bool(false)
                } else {
                    let rv = self.expr(r)?;
                    Value::Bool(self.truthy(rv, "&&")?)
                }
            }
            Expr::Binary(BinOp::Or, l, r) => {
                let lv = self.expr(l)?;
                if self.truthy(lv, "||")? {
                    Value::Bool(true)
                } else {
                    let rv = self.expr(r)?;
                    Value::Bool(self.truthy(rv, "||")?)
                }
            }
            Expr::Binary(op, l, r) => {
                let lv = self.expr(l)?;
                let rv = self.expr(r)?;
                match op {
                    BinOp::Eq => Value::Bool(lv == rv),
                    BinOp::Ne => Value::Bool(lv != rv),
                    _ => {
                        let sym = op.symbol();
                        let a = Self::num(lv, sym)?;
                        let b = Self::num(rv, sym)?;
                        match op {
                            BinOp::Lt => Value::Bool(a < b),
                            BinOp::Le => Value::Bool(a <= b),
                            BinOp::Gt => Value::Bool(a > b),
                            BinOp::Ge => Value::Bool(a >= b),
                            BinOp::Add => Value::Num(a + b),
                            BinOp::Sub => Value::Num(a - b),
                            BinOp::Mul => Value::Num(a * b),
                            BinOp::Div | BinOp::Rem if b == 0.0 => {
                                return Err((EvalErrorKind::Domain, format!("{sym} by zero")))
                            }
                            BinOp::Div => Value::Num(a / b),
                            BinOp::Rem => Value::Num(a % b),
                            _ => unreachable!(),
                        }
                    }
                }
            }
            Expr::Call(name, args) => {
                let args = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                if self.functions.contains_key(name.as_str()) {
                    self.call_user(name, args)?
                } else if let Some(b) = builtins::lookup(name) {
                    if b.params.len() != args.len() {
                        return Err((EvalErrorKind::Type, format!("{name} takes {} arguments", b.params.len())));
                    }
                    for (i, (v, ty)) in args.iter().zip(b.params).enumerate() {
                        if !v.fits(ty) {
                            return Err((
                                EvalErrorKind::Type,
                                format!("argument {} of {name}: expected {}, got {}", i + 1, ty.name(), v.type_name()),
                            ));
                        }
                    }
                    self.tick(builtins::cost(name, self.state))?;
                    builtins::call(name, &args, self.state)?
                } else {
                    return Err((EvalErrorKind::Type, format!("undefined function {name}")));
                }
            }
        })
    }
}
