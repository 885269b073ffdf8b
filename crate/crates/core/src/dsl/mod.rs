//! A small, pure reward language.
//!
//! A program is a list of functions. The entry point `reward(s, instr)`
//! receives the state and its instruction string and returns a number in
//! `[0, 100]`; every other function is a helper. A helper may shadow a
//! builtin of the same name. Programs cannot recurse,
//! have no side effects other than `debug(...)` traces, and are evaluated
//! under a step budget.
//!
//! ```text
//! program  = { function } ;
//! function = "fn" ident "(" [ ident { "," ident } ] ")" block ;
//! block    = "{" { stmt } "}" ;
//! stmt     = "let" ident "=" expr [";"]
//!          | ident "=" expr [";"]
//!          | "if" expr block [ "else" ( block | if-stmt ) ]
//!          | "for" ident "in" expr block
//!          | "while" expr block
//!          | "return" expr [";"]
//!          | "debug" "(" [ expr { "," expr } ] ")" [";"]
//!          | expr [";"] ;
//! expr     = binary expression over || && == != < <= > >= + - * / %
//!            ( "and" / "or" are aliases ), unary "-" "!" "not",
//!            postfix ".x" ".y" "[" expr "]", calls, "[" list "]",
//!            numbers, strings, true, false, identifiers ;
//! ```
//!
//! Comments start with `#` or `//`.

mod ast;
mod builtins;
mod check;
mod hash;
mod interp;
mod parser;
mod value;

use std::collections::HashMap;
use std::fmt;

pub use ast::{
    block_exprs, block_exprs_mut, format_number, print_expr, print_function, print_program, BinOp, Block, Expr,
    Field, Function, Program, Stmt, UnOp,
};
pub use builtins::{lookup as builtin, Builtin, Ty, BUILTINS};
pub use hash::function_hashes;
pub use value::Value;

use crate::state::GridState;

pub const ENTRY: &str = "reward";
pub const DEFAULT_STEP_BUDGET: usize = 100_000;
pub const MAX_REWARD: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("undefined name `{name}` in {function}")]
    Undefined { name: String, function: String },
    #[error("`{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("type error in {function}: {msg}")]
    Type { function: String, msg: String },
    #[error("recursive call chain: {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("missing entry point `fn reward(s, instr)`")]
    MissingEntry,
    #[error("duplicate function name `{0}`")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalErrorKind {
    Parse,
    Type,
    StepBudgetExceeded,
    NonFinite,
    Domain,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalErrorKind::Parse => "parse",
            EvalErrorKind::Type => "type",
            EvalErrorKind::StepBudgetExceeded => "step budget exceeded",
            EvalErrorKind::NonFinite => "non-finite result",
            EvalErrorKind::Domain => "domain",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: Result<f64, EvalErrorKind>,
    pub debug_trace: Vec<String>,
    pub steps_used: usize,
}

impl EvalResult {
    /// The reward, with failed evaluations scored as 0.
    pub fn reward(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }
}

/// A checked program together with its canonical text and helper identities.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardProgram {
    pub source: String,
    pub program: Program,
    /// Every non-entry function with its alpha-normalized hash.
    pub helpers: Vec<(String, String)>,
    pub created_generation: usize,
}

impl RewardProgram {
    pub fn from_ast(program: Program, created_generation: usize) -> Result<Self, DslError> {
        check::check(&program)?;
        let hashes = function_hashes(&program);
        let helpers = program
            .functions
            .iter()
            .filter(|f| f.name != ENTRY)
            .map(|f| (f.name.clone(), hashes[&f.name].clone()))
            .collect();
        Ok(RewardProgram {
            source: print_program(&program),
            program,
            helpers,
            created_generation,
        })
    }

    pub fn helper_hashes(&self) -> impl Iterator<Item = &str> {
        self.helpers.iter().map(|(_, h)| h.as_str())
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.program.functions.iter().find(|f| f.name == name)
    }

    /// Static call sites per helper name, counted across the whole program.
    pub fn helper_call_counts(&self) -> HashMap<String, usize> {
        let mut counts: HashMap<String, usize> = self.helpers.iter().map(|(n, _)| (n.clone(), 0)).collect();
        for f in &self.program.functions {
            block_exprs(&f.body, &mut |e| {
                if let Expr::Call(name, _) = e {
                    if let Some(c) = counts.get_mut(name) {
                        *c += 1;
                    }
                }
            });
        }
        counts
    }

    /// Evaluates on `state` with its own instruction and the default budget.
    pub fn evaluate(&self, state: &GridState) -> EvalResult {
        evaluate(self, state, &state.instruction, DEFAULT_STEP_BUDGET)
    }
}

pub fn parse_program(src: &str) -> Result<RewardProgram, DslError> {
    parse_program_at(src, 0)
}

pub fn parse_program_at(src: &str, created_generation: usize) -> Result<RewardProgram, DslError> {
    RewardProgram::from_ast(parser::parse(src)?, created_generation)
}

/// Parses without the static checks, for tooling that inspects broken text.
pub fn parse_unchecked(src: &str) -> Result<Program, DslError> {
    parser::parse(src)
}

pub fn evaluate(program: &RewardProgram, state: &GridState, instruction: &str, step_budget: usize) -> EvalResult {
    let mut it = interp::Interp::new(&program.program, state, step_budget);
    let out = it.run_entry(instruction);
    let mut trace = std::mem::take(&mut it.trace);
    let value = match out {
        Ok(Value::Num(v)) if !v.is_finite() => {
            trace.push(format!("error: reward is {v}"));
            Err(EvalErrorKind::NonFinite)
        }
        Ok(Value::Num(v)) if v < 0.0 => {
            trace.push(format!("domain warning: negative reward {} clamped to 0", format_number(v)));
            Ok(0.0)
        }
        Ok(Value::Num(v)) => Ok(v),
        Ok(other) => {
            trace.push(format!("error: reward returned {}", other.type_name()));
            Err(EvalErrorKind::Type)
        }
        Err((kind, msg)) => {
            trace.push(format!("error: {msg}"));
            Err(kind)
        }
    };
    EvalResult {
        value,
        debug_trace: trace,
        steps_used: it.steps,
    }
}

/// Distinct helper hashes and how many programs in `programs` define each.
pub fn helper_inventory<'a>(programs: impl IntoIterator<Item = &'a RewardProgram>) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    for p in programs {
        let mut seen: Vec<&str> = p.helper_hashes().collect();
        seen.sort_unstable();
        seen.dedup();
        for h in seen {
            *out.entry(h.to_string()).or_insert(0) += 1;
        }
    }
    out
}
