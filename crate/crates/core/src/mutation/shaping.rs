//! Progress shaping for programs whose non-goal branch is flat.

use super::templates::template;
use crate::dsl::{parse_unchecked, BinOp, Expr, Function, Program, RewardProgram, Stmt, UnOp, ENTRY};
use crate::trajectory::Trajectory;

const NEAREST: &str = "fn nearest_dist(s, obj, color) {
    let best = width(s) + height(s)
    for p in find_all(s, obj, color) {
        best = min(best, manhattan(p, agent_pos(s)))
    }
    return best
}";

/// Index of the first top-level `if` of `f` whose then-branch returns a
/// value of at least 50.
pub fn main_condition(f: &Function) -> Option<usize> {
    f.body.iter().position(|stmt| match stmt {
        Stmt::If(_, then, _) => then
            .iter()
            .any(|s| matches!(s, Stmt::Return(Expr::Num(v)) if *v >= 50.0)),
        _ => false,
    })
}

/// Top-level conjuncts of `e`, left to right.
fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary(BinOp::And, a, b) => {
            let mut out = conjuncts(a);
            out.extend(conjuncts(b));
            out
        }
        other => vec![other],
    }
}

fn target_of(conjunct: &Expr) -> Option<(Expr, Expr)> {
    let Expr::Call(name, args) = conjunct else { return None };
    let (obj, color) = template(name)?.target?;
    let obj = match obj {
        Some(i) => args.get(i + 1)?.clone(),
        None => Expr::str("door"),
    };
    Some((obj, args.get(color + 1)?.clone()))
}

/// Where along the demonstrations `pred` starts holding for good, as a
/// fraction of trajectory length averaged over `experts`; 1 when it never
/// settles.
fn settle_point(program: &Program, entry: &Function, pred: &Expr, experts: &[Trajectory]) -> f64 {
    if experts.is_empty() {
        return 0.0;
    }
    let mut probe = program.clone();
    let body = vec![
        Stmt::If(pred.clone(), vec![Stmt::Return(Expr::Num(100.0))], None),
        Stmt::Return(Expr::Num(0.0)),
    ];
    if let Some(f) = probe.functions.iter_mut().find(|f| f.name == ENTRY) {
        *f = Function {
            body,
            ..entry.clone()
        };
    }
    let Ok(probe) = RewardProgram::from_ast(probe, 0) else { return 1.0 };
    let total: f64 = experts
        .iter()
        .map(|t| {
            let held: Vec<bool> = t.states().map(|s| probe.evaluate(s).reward() >= 50.0).collect();
            match held.iter().rposition(|h| !h) {
                None => 0.0,
                Some(i) => (i + 1) as f64 / held.len() as f64,
            }
        })
        .sum();
    total / experts.len() as f64
}

/// Replaces the flat fallback after the main conditional with staged
/// progress terms: one stage per conjunct, each worth a fixed base plus a
/// distance bonus toward the conjunct's target object. Stages follow the
/// order in which `experts` come to satisfy the conjuncts. Every shaped
/// value stays below 1. Returns `None` when the program has no main
/// conditional or is already shaped.
pub fn shaping_edit(program: &Program, experts: &[Trajectory]) -> Option<Program> {
    if program.functions.iter().any(|f| f.name == "nearest_dist") {
        return None;
    }
    let mut out = program.clone();
    let entry = out.functions.iter_mut().find(|f| f.name == ENTRY)?;
    let at = main_condition(entry)?;
    let Stmt::If(cond, _, _) = &entry.body[at] else { return None };
    let mut parts: Vec<(f64, Expr)> = conjuncts(cond)
        .into_iter()
        .map(|c| (settle_point(program, entry, c, experts), c.clone()))
        .collect();
    parts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let parts: Vec<Expr> = parts.into_iter().map(|(_, c)| c).collect();
    let s = entry.params.first()?.clone();
    let stage = 0.9 / parts.len() as f64;
    let bonus = 0.8 * stage;
    let span = Expr::bin(
        BinOp::Add,
        Expr::call("width", vec![Expr::var(&s)]),
        Expr::call("height", vec![Expr::var(&s)]),
    );
    let mut stages = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let base = Expr::Num(((i as f64) * stage * 1e6).round() / 1e6);
        let value = match target_of(p) {
            Some((obj, color)) => {
                let d = Expr::call("nearest_dist", vec![Expr::var(&s), obj, color]);
                let closeness = Expr::bin(BinOp::Sub, Expr::Num(1.0), Expr::bin(BinOp::Div, d, span.clone()));
                Expr::bin(BinOp::Add, base, Expr::bin(BinOp::Mul, Expr::Num((bonus * 1e6).round() / 1e6), closeness))
            }
            None => base,
        };
        stages.push(Stmt::If(
            Expr::Unary(UnOp::Not, Box::new(p.clone())),
            vec![Stmt::Return(value)],
            None,
        ));
    }
    let tail: Vec<Stmt> = entry.body.drain(at + 1..).collect();
    entry.body.extend(stages);
    entry.body.extend(tail);
    out.functions.push(parse_unchecked(NEAREST).ok()?.functions.remove(0));
    Some(out)
}
