//! Static checks run before a program is admitted: name resolution, arity,
//! acyclic calls, and the type errors that are decidable without running.

use std::collections::HashMap;

use super::ast::{BinOp, Block, Expr, Function, Program, Stmt, UnOp};
use super::builtins::{lookup, Ty};
use super::{DslError, ENTRY};

struct Checker<'a> {
    functions: HashMap<&'a str, &'a Function>,
    current: &'a str,
    scopes: Vec<HashMap<String, Ty>>,
}

impl<'a> Checker<'a> {
    fn type_err<T>(&self, msg: String) -> Result<T, DslError> {
        Err(DslError::Type {
            function: self.current.to_string(),
            msg,
        })
    }

    fn lookup_var(&self, name: &str) -> Option<&Ty> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn expect(&self, got: &Ty, want: &Ty, what: &str) -> Result<(), DslError> {
        if got.fits(want) {
            Ok(())
        } else {
            self.type_err(format!("{what}: expected {}, found {}", want.name(), got.name()))
        }
    }

    fn block(&mut self, block: &Block) -> Result<(), DslError> {
        self.scopes.push(HashMap::new());
        for stmt in block {
            self.stmt(stmt)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), DslError> {
        match stmt {
            Stmt::Let(name, e) => {
                let ty = self.expr(e)?;
                self.scopes.last_mut().unwrap().insert(name.clone(), ty);
            }
            Stmt::Assign(name, e) => {
                let ty = self.expr(e)?;
                let Some(prev) = self.lookup_var(name).cloned() else {
                    return Err(DslError::Undefined {
                        name: name.clone(),
                        function: self.current.to_string(),
                    });
                };
                self.expect(&ty, &prev, &format!("assignment to `{name}`"))?;
            }
            Stmt::If(c, then, other) => {
                let ty = self.expr(c)?;
                self.expect(&ty, &Ty::Bool, "if condition")?;
                self.block(then)?;
                if let Some(other) = other {
                    self.block(other)?;
                }
            }
            Stmt::While(c, body) => {
                let ty = self.expr(c)?;
                self.expect(&ty, &Ty::Bool, "while condition")?;
                self.block(body)?;
            }
            Stmt::For(var, iter, body) => {
                let ty = self.expr(iter)?;
                self.expect(&ty, &Ty::List, "for loop")?;
                let elem = if ty == Ty::PosList { Ty::Pos } else { Ty::Any };
                self.scopes.push(HashMap::from([(var.clone(), elem)]));
                self.block(body)?;
                self.scopes.pop();
            }
            Stmt::Return(e) => {
                let ty = self.expr(e)?;
                if self.current == ENTRY {
                    self.expect(&ty, &Ty::Num, "reward return value")?;
                }
            }
            Stmt::Debug(es) => {
                for e in es {
                    self.expr(e)?;
                }
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<Ty, DslError> {
        Ok(match e {
            Expr::Num(_) => Ty::Num,
            Expr::Bool(_) => Ty::Bool,
            Expr::Str(_) => Ty::Str,
            Expr::Var(name) => match self.lookup_var(name) {
                Some(ty) => ty.clone(),
                None => {
                    return Err(DslError::Undefined {
                        name: name.clone(),
                        function: self.current.to_string(),
                    })
                }
            },
            Expr::List(items) => {
                let tys = items.iter().map(|i| self.expr(i)).collect::<Result<Vec<_>, _>>()?;
                if !tys.is_empty() && tys.iter().all(|t| *t == Ty::Pos) {
                    Ty::PosList
                } else {
                    Ty::List
                }
            }
            Expr::Field(inner, _) => {
                let ty = self.expr(inner)?;
                self.expect(&ty, &Ty::Pos, "field access")?;
                Ty::Num
            }
            Expr::Index(list, idx) => {
                let lt = self.expr(list)?;
                let it = self.expr(idx)?;
                self.expect(&lt, &Ty::List, "indexing")?;
                self.expect(&it, &Ty::Num, "index")?;
                if lt == Ty::PosList {
                    Ty::Pos
                } else {
                    Ty::Any
                }
            }
            Expr::Unary(op, inner) => {
                let ty = self.expr(inner)?;
                let want = if *op == UnOp::Neg { Ty::Num } else { Ty::Bool };
                self.expect(&ty, &want, "operand")?;
                want
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(l)?;
                let rt = self.expr(r)?;
                let sym = op.symbol();
                match op {
                    BinOp::And | BinOp::Or => {
                        self.expect(&lt, &Ty::Bool, sym)?;
                        self.expect(&rt, &Ty::Bool, sym)?;
                        Ty::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if !(lt.fits(&rt) || rt.fits(&lt)) {
                            return self.type_err(format!("cannot compare {} with {}", lt.name(), rt.name()));
                        }
                        Ty::Bool
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        self.expect(&lt, &Ty::Num, sym)?;
                        self.expect(&rt, &Ty::Num, sym)?;
                        Ty::Bool
                    }
                    _ => {
                        self.expect(&lt, &Ty::Num, sym)?;
                        self.expect(&rt, &Ty::Num, sym)?;
                        Ty::Num
                    }
                }
            }
            Expr::Call(name, args) => {
                let tys = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                if let Some(f) = self.functions.get(name.as_str()) {
                    if f.params.len() != args.len() {
                        return Err(DslError::Arity {
                            name: name.clone(),
                            expected: f.params.len(),
                            got: args.len(),
                        });
                    }
                    Ty::Any
                } else if let Some(b) = lookup(name) {
                    if b.params.len() != args.len() {
                        return Err(DslError::Arity {
                            name: name.clone(),
                            expected: b.params.len(),
                            got: args.len(),
                        });
                    }
                    for (i, (got, want)) in tys.iter().zip(b.params).enumerate() {
                        self.expect(got, want, &format!("argument {} of {name}", i + 1))?;
                    }
                    b.ret.clone()
                } else {
                    return Err(DslError::Undefined {
                        name: name.clone(),
                        function: self.current.to_string(),
                    });
                }
            }
        })
    }
}

/// Names of user functions called from `f`, in call order.
pub fn callees(f: &Function, program: &Program) -> Vec<String> {
    let mut out = Vec::new();
    super::ast::block_exprs(&f.body, &mut |e| {
        if let Expr::Call(name, _) = e {
            if program.functions.iter().any(|g| &g.name == name) {
                out.push(name.clone());
            }
        }
    });
    out
}

fn find_cycle(program: &Program) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(name: &str, program: &Program, marks: &mut HashMap<String, Mark>, path: &mut Vec<String>) -> bool {
        match marks.get(name).copied().unwrap_or(Mark::New) {
            Mark::Done => return false,
            Mark::Active => {
                path.push(name.to_string());
                return true;
            }
            Mark::New => {}
        }
        marks.insert(name.to_string(), Mark::Active);
        path.push(name.to_string());
        let f = program.functions.iter().find(|f| f.name == name).unwrap();
        for callee in callees(f, program) {
            if visit(&callee, program, marks, path) {
                return true;
            }
        }
        path.pop();
        marks.insert(name.to_string(), Mark::Done);
        false
    }
    let mut marks = HashMap::new();
    for f in &program.functions {
        let mut path = Vec::new();
        if visit(&f.name, program, &mut marks, &mut path) {
            return Some(path);
        }
    }
    None
}

pub fn check(program: &Program) -> Result<(), DslError> {
    let mut functions = HashMap::new();
    for f in &program.functions {
        if functions.insert(f.name.as_str(), f).is_some() {
            return Err(DslError::Duplicate(f.name.clone()));
        }
    }
    match functions.get(ENTRY) {
        Some(f) if f.params.len() == 2 => {}
        _ => return Err(DslError::MissingEntry),
    }
    for f in &program.functions {
        let mut params = HashMap::new();
        for (i, p) in f.params.iter().enumerate() {
            let ty = if f.name == ENTRY {
                if i == 0 {
                    Ty::State
                } else {
                    Ty::Str
                }
            } else {
                Ty::Any
            };
            params.insert(p.clone(), ty);
        }
        let mut checker = Checker {
            functions: functions.clone(),
            current: &f.name,
            scopes: vec![params],
        };
        checker.block(&f.body)?;
    }
    if let Some(cycle) = find_cycle(program) {
        return Err(DslError::Recursion(cycle));
    }
    Ok(())
}
