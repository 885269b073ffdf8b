//! Structural identity of helper functions, invariant to the names of the
//! function itself, its parameters and its locals.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::ast::{block_exprs_mut, print_function, Block, Expr, Function, Program, Stmt};

fn rename_block(block: &mut Block, map: &mut Vec<HashMap<String, String>>, next: &mut usize) {
    map.push(HashMap::new());
    for stmt in block.iter_mut() {
        rename_stmt(stmt, map, next);
    }
    map.pop();
}

fn fresh(map: &mut [HashMap<String, String>], name: &mut String, next: &mut usize) {
    let new = format!("v{next}");
    *next += 1;
    map.last_mut().unwrap().insert(std::mem::take(name), new.clone());
    *name = new;
}

fn rename_expr(e: &mut Expr, map: &[HashMap<String, String>]) {
    e.walk_mut(&mut |e| {
        if let Expr::Var(name) = e {
            if let Some(new) = map.iter().rev().find_map(|m| m.get(name.as_str())) {
                *name = new.clone();
            }
        }
    });
}

fn rename_stmt(stmt: &mut Stmt, map: &mut Vec<HashMap<String, String>>, next: &mut usize) {
    match stmt {
        Stmt::Let(name, e) => {
            rename_expr(e, map);
            fresh(map, name, next);
        }
        Stmt::Assign(name, e) => {
            rename_expr(e, map);
            if let Some(new) = map.iter().rev().find_map(|m| m.get(name.as_str())) {
                *name = new.clone();
            }
        }
        Stmt::If(c, a, b) => {
            rename_expr(c, map);
            rename_block(a, map, next);
            if let Some(b) = b {
                rename_block(b, map, next);
            }
        }
        Stmt::While(c, body) => {
            rename_expr(c, map);
            rename_block(body, map, next);
        }
        Stmt::For(var, e, body) => {
            rename_expr(e, map);
            map.push(HashMap::new());
            fresh(map, var, next);
            rename_block(body, map, next);
            map.pop();
        }
        Stmt::Return(e) | Stmt::Expr(e) => rename_expr(e, map),
        Stmt::Debug(es) => es.iter_mut().for_each(|e| rename_expr(e, map)),
    }
}

/// Renames the function to `f`, parameters and locals to `v0..vn` in order
/// of binding, and user calls to the callee's hash.
pub fn normalize(f: &Function, callee_hashes: &HashMap<String, String>) -> Function {
    let mut out = f.clone();
    out.name = "f".into();
    let mut next = 0;
    let mut map = vec![HashMap::new()];
    for p in out.params.iter_mut() {
        fresh(&mut map, p, &mut next);
    }
    rename_block(&mut out.body, &mut map, &mut next);
    block_exprs_mut(&mut out.body, &mut |e| {
        if let Expr::Call(name, _) = e {
            if let Some(h) = callee_hashes.get(name.as_str()) {
                *name = format!("h_{}", &h[..16]);
            }
        }
    });
    out
}

/// Hash of every function keyed by its name. Requires an acyclic call graph.
pub fn function_hashes(program: &Program) -> HashMap<String, String> {
    let mut done: HashMap<String, String> = HashMap::new();
    fn go(name: &str, program: &Program, done: &mut HashMap<String, String>) {
        if done.contains_key(name) {
            return;
        }
        let f = program.functions.iter().find(|f| f.name == name).unwrap();
        for c in super::check::callees(f, program) {
            if c != name {
                go(&c, program, done);
            }
        }
        let norm = normalize(f, done);
        let digest = Sha256::digest(print_function(&norm).as_bytes());
        done.insert(name.to_string(), hex::encode(digest));
    }
    for f in &program.functions {
        go(&f.name, program, &mut done);
    }
    done
}
