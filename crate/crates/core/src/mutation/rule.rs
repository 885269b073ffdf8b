//! A mutator that needs no model: feedback-guided edits over the template
//! library.

use std::collections::HashSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use super::shaping::{main_condition, shaping_edit};
use super::templates::{atom_kind, instantiate, template, Param, Vocabulary, TEMPLATES};
use super::{reparse, MutationContext, MutationMode};
use crate::dsl::{BinOp, Expr, Function, Program, RewardProgram, Stmt, UnOp, ENTRY};
use crate::sets::LabeledStateSets;
use crate::state::GridState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    /// Rescale or shift a numeric literal.
    Constant,
    /// Replace an object or color argument.
    SwapAtom,
    /// Conjoin or disjoin a predicate chosen against the feedback.
    InsertPredicate,
    /// Copy a helper and one of its call sites from another program.
    Graft,
    /// Remove one conjunct or disjunct of the main condition.
    DropTerm,
}

const EDITS: [(Edit, f64); 5] = [
    (Edit::Constant, 0.1),
    (Edit::SwapAtom, 0.2),
    (Edit::InsertPredicate, 0.45),
    (Edit::Graft, 0.1),
    (Edit::DropTerm, 0.15),
];

const ATTEMPTS: usize = 24;
const CANDIDATES: usize = 8;
/// Chance that an argument reads the instruction rather than a literal word.
const INIT_SLOT_PROB: f64 = 0.1;
const EDIT_SLOT_PROB: f64 = 0.5;

fn entry(p: &Program) -> Option<&Function> {
    p.functions.iter().find(|f| f.name == ENTRY)
}

fn entry_mut(p: &mut Program) -> Option<&mut Function> {
    p.functions.iter_mut().find(|f| f.name == ENTRY)
}

fn skeleton(cond: Expr) -> Function {
    Function {
        name: ENTRY.into(),
        params: vec!["s".into(), "instr".into()],
        body: vec![
            Stmt::If(cond, vec![Stmt::Return(Expr::Num(100.0))], None),
            Stmt::Return(Expr::Num(0.1)),
        ],
    }
}

/// Names of user functions called from `e`.
fn called(e: &Expr, out: &mut Vec<String>) {
    e.walk(&mut |x| {
        if let Expr::Call(name, _) = x {
            out.push(name.clone());
        }
    });
}

fn function_calls(f: &Function) -> Vec<String> {
    let mut out = Vec::new();
    crate::dsl::block_exprs(&f.body, &mut |e| {
        if let Expr::Call(name, _) = e {
            out.push(name.clone());
        }
    });
    out
}

/// Adds template helpers that `p` calls but does not define, then drops
/// functions unreachable from the entry point.
fn tidy(mut p: Program) -> Program {
    let defined: HashSet<String> = p.functions.iter().map(|f| f.name.clone()).collect();
    let mut missing = Vec::new();
    for f in &p.functions {
        for c in function_calls(f) {
            if !defined.contains(&c) && !missing.contains(&c) && template(&c).is_some() {
                missing.push(c);
            }
        }
    }
    for name in missing {
        p.functions.push(template(&name).unwrap().function());
    }
    let mut reachable: HashSet<String> = HashSet::from([ENTRY.to_string()]);
    let mut frontier = vec![ENTRY.to_string()];
    while let Some(name) = frontier.pop() {
        let Some(f) = p.functions.iter().find(|f| f.name == name) else { continue };
        for c in function_calls(f) {
            if p.functions.iter().any(|g| g.name == c) && reachable.insert(c.clone()) {
                frontier.push(c);
            }
        }
    }
    p.functions.retain(|f| reachable.contains(&f.name));
    p
}

fn rename_vars(e: &mut Expr, from: &str, to: &str) {
    if from == to {
        return;
    }
    e.walk_mut(&mut |x| {
        if let Expr::Var(v) = x {
            if v == from {
                *v = to.to_string();
            }
        }
    });
}

/// Rewrites an expression built over `s`/`instr` to the entry's own
/// parameter names.
fn adapt(mut e: Expr, f: &Function) -> Expr {
    if let [s, i] = f.params.as_slice() {
        // through a placeholder so swapped names cannot collide
        rename_vars(&mut e, "s", "\u{1}s");
        rename_vars(&mut e, "instr", i);
        rename_vars(&mut e, "\u{1}s", s);
    }
    e
}

/// Whether `pred` holds on `state`, judged by a probe program.
fn holds(pred: &Expr, state: &GridState) -> Option<bool> {
    let p = tidy(Program {
        functions: vec![skeleton(pred.clone())],
    });
    let prog = reparse(p, 0).ok()?;
    prog.evaluate(state).value.ok().map(|v| v >= 50.0)
}

fn random_template(rng: &mut impl Rng) -> &'static super::templates::Template {
    TEMPLATES.choose(rng).unwrap()
}

/// A seed program: one template predicate, sometimes two combined.
pub fn init_program_rule_based(sets: &LabeledStateSets, rng: &mut impl Rng) -> RewardProgram {
    let refs: Vec<&GridState> = sets.goal_states().choose_multiple(rng, 8);
    let vocab = Vocabulary::from_states(refs);
    loop {
        let mut cond = instantiate(random_template(rng), &vocab, INIT_SLOT_PROB, rng);
        if rng.gen_bool(0.3) {
            let other = instantiate(random_template(rng), &vocab, INIT_SLOT_PROB, rng);
            let op = if rng.gen_bool(0.5) { BinOp::And } else { BinOp::Or };
            cond = Expr::bin(op, cond, other);
        }
        let p = tidy(Program {
            functions: vec![skeleton(cond)],
        });
        if let Ok(prog) = reparse(p, 0) {
            return prog;
        }
    }
}

/// An offspring of `ctx.parent`. Falls back to the parent when no edit
/// yields a different valid program.
pub fn mutate_rule_based(ctx: &MutationContext, donors: &[&RewardProgram], rng: &mut impl Rng) -> RewardProgram {
    let parent = &ctx.parent;
    if ctx.mode == MutationMode::ShapingFix {
        if let Some(p) = shaping_edit(&parent.program, &ctx.expert_trajectories).and_then(|p| reparse(p, parent.created_generation).ok()) {
            return p;
        }
    }
    let vocab = Vocabulary::from_states(ctx.states());
    for _ in 0..ATTEMPTS {
        let edit = EDITS.choose_weighted(rng, |(_, w)| *w).unwrap().0;
        let Some(p) = apply(edit, ctx, &vocab, donors, rng) else { continue };
        if let Ok(child) = reparse(tidy(p), parent.created_generation) {
            if child.source != parent.source {
                return child;
            }
        }
    }
    parent.clone()
}

/// Applies one specific edit; `None` when it does not apply to the parent
/// or yields an invalid program.
pub fn apply_edit(edit: Edit, ctx: &MutationContext, donors: &[&RewardProgram], rng: &mut impl Rng) -> Option<RewardProgram> {
    let vocab = Vocabulary::from_states(ctx.states());
    let p = apply(edit, ctx, &vocab, donors, rng)?;
    reparse(tidy(p), ctx.parent.created_generation).ok()
}

pub(crate) fn apply(
    edit: Edit,
    ctx: &MutationContext,
    vocab: &Vocabulary,
    donors: &[&RewardProgram],
    rng: &mut impl Rng,
) -> Option<Program> {
    let mut p = ctx.parent.program.clone();
    match edit {
        Edit::Constant => {
            let f = entry_mut(&mut p)?;
            let mut n = 0;
            crate::dsl::block_exprs(&f.body, &mut |e| n += matches!(e, Expr::Num(_)) as usize);
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            let op = rng.gen_range(0..4);
            let mut i = 0;
            crate::dsl::block_exprs_mut(&mut f.body, &mut |e| {
                if let Expr::Num(v) = e {
                    if i == pick {
                        *v = match op {
                            0 => *v * 0.5,
                            1 => *v * 2.0,
                            2 => *v + 1.0,
                            _ => *v - 1.0,
                        };
                    }
                    i += 1;
                }
            });
        }
        Edit::SwapAtom => {
            let f = entry_mut(&mut p)?;
            let n = visit_atoms(&mut f.body, &mut |_, _| {});
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            let mut i = 0;
            let mut changed = false;
            visit_atoms(&mut f.body, &mut |e, kind| {
                if i == pick {
                    let new = vocab.sample(kind, EDIT_SLOT_PROB, rng);
                    changed = new != *e;
                    *e = new;
                }
                i += 1;
            });
            if !changed {
                return None;
            }
        }
        Edit::InsertPredicate => {
            let lit = choose_predicate(ctx, vocab, rng)?;
            let f = entry_mut(&mut p)?;
            let widen = lit.1;
            let lit = adapt(lit.0, f);
            combine(f, lit, widen, rng);
        }
        Edit::Graft => {
            let donor = donors.iter().filter(|d| d.source != ctx.parent.source).choose(rng)?;
            let dentry = entry(&donor.program)?;
            let mut sites = Vec::new();
            crate::dsl::block_exprs(&dentry.body, &mut |e| {
                if let Expr::Call(name, _) = e {
                    if donor.program.functions.iter().any(|g| &g.name == name && g.name != ENTRY) {
                        sites.push(e.clone());
                    }
                }
            });
            let site = sites.choose(rng)?.clone();
            // bring the call's helpers, refusing name clashes with different bodies
            let mut needed = Vec::new();
            called(&site, &mut needed);
            let mut i = 0;
            while i < needed.len() {
                if let Some(g) = donor.program.functions.iter().find(|g| g.name == needed[i]) {
                    for c in function_calls(g) {
                        if !needed.contains(&c) {
                            needed.push(c);
                        }
                    }
                }
                i += 1;
            }
            for name in &needed {
                let Some(g) = donor.program.functions.iter().find(|g| &g.name == name) else { continue };
                match p.functions.iter().find(|h| &h.name == name) {
                    Some(h) if h != g => return None,
                    Some(_) => {}
                    None => p.functions.push(g.clone()),
                }
            }
            let f = entry_mut(&mut p)?;
            let site = rename_entry(site, dentry, f);
            let widen = feedback_direction(ctx, rng);
            combine(f, site, widen, rng);
        }
        Edit::DropTerm => {
            let f = entry_mut(&mut p)?;
            let at = main_condition(f)?;
            let Stmt::If(cond, _, _) = &mut f.body[at] else { return None };
            let Expr::Binary(BinOp::And | BinOp::Or, a, b) = cond else { return None };
            *cond = if rng.gen_bool(0.5) { (**a).clone() } else { (**b).clone() };
        }
    }
    Some(p)
}

fn rename_entry(mut e: Expr, from: &Function, to: &Function) -> Expr {
    if let ([fs, fi], [ts, ti]) = (from.params.as_slice(), to.params.as_slice()) {
        rename_vars(&mut e, fs, "\u{1}s");
        rename_vars(&mut e, fi, "\u{1}i");
        rename_vars(&mut e, "\u{1}s", ts);
        rename_vars(&mut e, "\u{1}i", ti);
    }
    e
}

/// True to widen the condition (missed goals), false to narrow it.
fn feedback_direction(ctx: &MutationContext, rng: &mut impl Rng) -> bool {
    let fnn = ctx.feedback_states.iter().any(|f| f.is_goal);
    let fp = ctx.feedback_states.iter().any(|f| !f.is_goal);
    match (fnn, fp) {
        (true, false) => true,
        (false, true) => false,
        _ => rng.gen_bool(0.5),
    }
}

/// Joins `lit` onto the main condition, or replaces it outright now and
/// then; adds a main conditional when the entry has none.
fn combine(f: &mut Function, lit: Expr, widen: bool, rng: &mut impl Rng) {
    match main_condition(f) {
        Some(at) => {
            let Stmt::If(cond, _, _) = &mut f.body[at] else { unreachable!() };
            if rng.gen_bool(0.15) {
                *cond = lit;
            } else {
                let op = if widen { BinOp::Or } else { BinOp::And };
                let old = std::mem::replace(cond, Expr::Bool(false));
                *cond = Expr::bin(op, old, lit);
            }
        }
        None => f.body.insert(0, Stmt::If(lit, vec![Stmt::Return(Expr::Num(100.0))], None)),
    }
}

/// Samples candidate predicates and keeps the one that best repairs the
/// feedback states while staying true on the reference goal state.
/// Returns the literal and whether it widens the condition.
fn choose_predicate(ctx: &MutationContext, vocab: &Vocabulary, rng: &mut impl Rng) -> Option<(Expr, bool)> {
    let widen = feedback_direction(ctx, rng);
    let targets: Vec<&GridState> = ctx
        .feedback_states
        .iter()
        .filter(|f| f.is_goal == widen)
        .map(|f| &f.state)
        .collect();
    let goal_refs: Vec<&GridState> = ctx
        .paired_expert_state
        .iter()
        .chain(ctx.expert_trajectory.as_ref().map(|t| t.final_state()))
        .collect();
    let mut best: Option<(i64, Expr)> = None;
    for _ in 0..CANDIDATES {
        let mut lit = instantiate(random_template(rng), vocab, EDIT_SLOT_PROB, rng);
        if !widen && rng.gen_bool(0.5) {
            lit = Expr::Unary(UnOp::Not, Box::new(lit));
        }
        let mut score = 0i64;
        for s in &targets {
            // widening wants the literal true on missed goals; narrowing wants it false on false alarms
            if holds(&lit, s) == Some(widen) {
                score += 2;
            }
        }
        if !widen {
            for s in &goal_refs {
                if holds(&lit, s) == Some(true) {
                    score += 1;
                } else {
                    score -= 3;
                }
            }
        }
        if best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, lit));
        }
    }
    best.map(|(_, e)| (e, widen))
}

/// Visits swappable atoms: arguments of template calls and of `find_all`
/// by parameter kind, plus unambiguous word literals elsewhere. `f` sees
/// each atom with its kind. Returns the number visited.
fn visit_atoms(block: &mut [Stmt], f: &mut impl FnMut(&mut Expr, Param)) -> usize {
    let mut n = 0;
    for stmt in block {
        match stmt {
            Stmt::Let(_, e) | Stmt::Assign(_, e) | Stmt::Return(e) | Stmt::Expr(e) => n += visit_expr(e, None, f),
            Stmt::Debug(es) => es.iter_mut().for_each(|e| n += visit_expr(e, None, f)),
            Stmt::If(c, a, b) => {
                n += visit_expr(c, None, f);
                n += visit_atoms(a, f);
                if let Some(b) = b {
                    n += visit_atoms(b, f);
                }
            }
            Stmt::For(_, e, body) | Stmt::While(e, body) => {
                n += visit_expr(e, None, f);
                n += visit_atoms(body, f);
            }
        }
    }
    n
}

fn arg_kinds(name: &str) -> Option<Vec<Option<Param>>> {
    if name == "find_all" {
        return Some(vec![None, Some(Param::Object), Some(Param::Color)]);
    }
    let t = template(name)?;
    let mut out = vec![None];
    out.extend(t.params.iter().map(|p| Some(*p)));
    Some(out)
}

fn visit_expr(e: &mut Expr, expected: Option<Param>, f: &mut impl FnMut(&mut Expr, Param)) -> usize {
    let kind = match (expected, &*e) {
        (Some(Param::Side), Expr::Num(_)) => Some(Param::Side),
        (Some(Param::Side), _) => None,
        (Some(k), x) if atom_kind(x).is_some() => Some(k),
        (None, Expr::Str(w)) if w == "any" => None,
        (None, x) => atom_kind(x),
        _ => None,
    };
    if let Some(k) = kind {
        f(e, k);
        return 1;
    }
    let mut n = 0;
    match e {
        Expr::Call(name, args) => {
            let kinds = arg_kinds(name);
            for (i, a) in args.iter_mut().enumerate() {
                let k = kinds.as_ref().and_then(|ks| ks.get(i).copied().flatten());
                n += visit_expr(a, k, f);
            }
        }
        Expr::List(items) => items.iter_mut().for_each(|a| n += visit_expr(a, None, f)),
        Expr::Field(a, _) | Expr::Unary(_, a) => n += visit_expr(a, None, f),
        Expr::Index(a, b) | Expr::Binary(_, a, b) => {
            n += visit_expr(a, None, f);
            n += visit_expr(b, None, f);
        }
        _ => {}
    }
    n
}
