//! Syntax tree and canonical printer.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<Function>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let(String, Expr),
    Assign(String, Expr),
    If(Expr, Block, Option<Block>),
    For(String, Expr, Block),
    While(Expr, Block),
    Return(Expr),
    Debug(Vec<Expr>),
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Str(String),
    Var(String),
    List(Vec<Expr>),
    Call(String, Vec<Expr>),
    Field(Box<Expr>, Field),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Call(name.to_string(), args)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn str(s: &str) -> Expr {
        Expr::Str(s.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Visits every sub-expression, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::List(items) | Expr::Call(_, items) => items.iter().for_each(|e| e.walk(f)),
            Expr::Field(e, _) | Expr::Unary(_, e) => e.walk(f),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        match self {
            Expr::List(items) | Expr::Call(_, items) => items.iter_mut().for_each(|e| e.walk_mut(f)),
            Expr::Field(e, _) | Expr::Unary(_, e) => e.walk_mut(f),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.walk_mut(f);
                b.walk_mut(f);
            }
            _ => {}
        }
    }
}

/// Every expression directly held by statements of `block`, recursively.
pub fn block_exprs<'a>(block: &'a Block, f: &mut impl FnMut(&'a Expr)) {
    for stmt in block {
        match stmt {
            Stmt::Let(_, e) | Stmt::Assign(_, e) | Stmt::Return(e) | Stmt::Expr(e) => e.walk(f),
            Stmt::Debug(es) => es.iter().for_each(|e| e.walk(f)),
            Stmt::If(c, a, b) => {
                c.walk(f);
                block_exprs(a, f);
                if let Some(b) = b {
                    block_exprs(b, f);
                }
            }
            Stmt::For(_, e, body) | Stmt::While(e, body) => {
                e.walk(f);
                block_exprs(body, f);
            }
        }
    }
}

pub fn block_exprs_mut(block: &mut Block, f: &mut impl FnMut(&mut Expr)) {
    for stmt in block {
        match stmt {
            Stmt::Let(_, e) | Stmt::Assign(_, e) | Stmt::Return(e) | Stmt::Expr(e) => e.walk_mut(f),
            Stmt::Debug(es) => es.iter_mut().for_each(|e| e.walk_mut(f)),
            Stmt::If(c, a, b) => {
                c.walk_mut(f);
                block_exprs_mut(a, f);
                if let Some(b) = b {
                    block_exprs_mut(b, f);
                }
            }
            Stmt::For(_, e, body) | Stmt::While(e, body) => {
                e.walk_mut(f);
                block_exprs_mut(body, f);
            }
        }
    }
}

/// Shortest text that parses back to the same `f64`, always with a decimal
/// point so numbers stay visually distinct from indices.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, parent_prec: u8) {
    match e {
        Expr::Num(v) if *v < 0.0 && parent_prec > 9 => {
            let _ = write!(out, "({})", format_number(*v));
        }
        Expr::Num(v) => out.push_str(&format_number(*v)),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Str(s) => {
            let _ = write!(out, "\"{}\"", escape(s));
        }
        Expr::Var(v) => out.push_str(v),
        Expr::List(items) => {
            out.push('[');
            write_args(out, items);
            out.push(']');
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            write_args(out, args);
            out.push(')');
        }
        Expr::Field(inner, field) => {
            write_expr(out, inner, 10);
            out.push_str(match field {
                Field::X => ".x",
                Field::Y => ".y",
            });
        }
        Expr::Index(inner, idx) => {
            write_expr(out, inner, 10);
            out.push('[');
            write_expr(out, idx, 0);
            out.push(']');
        }
        Expr::Unary(op, inner) => {
            let wrap = parent_prec > 9;
            if wrap {
                out.push('(');
            }
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            write_expr(out, inner, 9);
            if wrap {
                out.push(')');
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let wrap = prec < parent_prec;
            if wrap {
                out.push('(');
            }
            write_expr(out, l, prec);
            let _ = write!(out, " {} ", op.symbol());
            // left-associative: a right operand of equal precedence needs parens
            write_expr(out, r, prec + 1);
            if wrap {
                out.push(')');
            }
        }
    }
}

fn write_args(out: &mut String, args: &[Expr]) {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a, 0);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, block: &Block, depth: usize) {
    out.push_str("{\n");
    for stmt in block {
        write_stmt(out, stmt, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_if(out: &mut String, cond: &Expr, then: &Block, other: &Option<Block>, depth: usize) {
    out.push_str("if ");
    write_expr(out, cond, 0);
    out.push(' ');
    write_block(out, then, depth);
    if let Some(other) = other {
        out.push_str(" else ");
        match other.as_slice() {
            [Stmt::If(c, t, o)] => write_if(out, c, t, o, depth),
            _ => write_block(out, other, depth),
        }
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match stmt {
        Stmt::Let(name, e) => {
            let _ = write!(out, "let {name} = {};", print_expr(e));
        }
        Stmt::Assign(name, e) => {
            let _ = write!(out, "{name} = {};", print_expr(e));
        }
        Stmt::If(c, t, o) => write_if(out, c, t, o, depth),
        Stmt::For(var, e, body) => {
            let _ = write!(out, "for {var} in {} ", print_expr(e));
            write_block(out, body, depth);
        }
        Stmt::While(c, body) => {
            let _ = write!(out, "while {} ", print_expr(c));
            write_block(out, body, depth);
        }
        Stmt::Return(e) => {
            let _ = write!(out, "return {};", print_expr(e));
        }
        Stmt::Debug(es) => {
            out.push_str("debug(");
            write_args(out, es);
            out.push_str(");");
        }
        Stmt::Expr(e) => {
            let _ = write!(out, "{};", print_expr(e));
        }
    }
    out.push('\n');
}

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let _ = write!(out, "fn {}({}) ", f.name, f.params.join(", "));
    write_block(&mut out, &f.body, 0);
    out.push('\n');
    out
}

/// Canonical source: functions in definition order separated by blank lines.
pub fn print_program(p: &Program) -> String {
    p.functions
        .iter()
        .map(print_function)
        .collect::<Vec<_>>()
        .join("\n")
}
