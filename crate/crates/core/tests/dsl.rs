use evoreward::dsl::{
    evaluate, helper_inventory, parse_program, parse_unchecked, print_expr, print_program, BinOp, DslError,
    EvalErrorKind, Expr, Field, UnOp, DEFAULT_STEP_BUDGET,
};
use evoreward::gridworld::{Env, EnvConfig};
use evoreward::state::GridState;
use proptest::prelude::*;

const GO_TO: &str = r#"
fn reward(s, instr) {
    let targets = find_all(s, instr_object(instr, 0), instr_color(instr, 0))
    for p in targets {
        if adjacent(p, agent_pos(s)) { return 100.0 }
    }
    return 0.1
}
"#;

fn go_to_states() -> Vec<(GridState, bool)> {
    let env = Env::new(EnvConfig::new("GoToObj", 6)).unwrap();
    let mut out = Vec::new();
    for seed in 0..20 {
        let t = env.expert_rollout(seed).unwrap();
        let n = t.len();
        out.extend(t.states().enumerate().map(|(i, s)| (s.clone(), i == n - 1)));
    }
    out
}

#[test]
fn empty_reward_has_no_helpers() {
    let p = parse_program("fn reward(s, instr) { return 0.0 }").unwrap();
    assert!(p.helpers.is_empty());
    assert!(helper_inventory([&p]).is_empty());
}

#[test]
fn defined_helper_is_listed() {
    let p = parse_program(
        "fn agent_pos(s) { return pos(0.0, 0.0) }\n\
         fn reward(s, instr) { if agent_pos(s) == pos(0.0, 0.0) { return 100.0 } return 0.0 }",
    )
    .unwrap();
    assert_eq!(p.helpers.len(), 1);
    assert_eq!(p.helpers[0].0, "agent_pos");
    // the helper shadows the builtin of the same name
    let (s, _) = &go_to_states()[0];
    assert_eq!(p.evaluate(s).value, Ok(100.0));
}

#[test]
fn duplicate_function_is_rejected() {
    let err = parse_program("fn h(s) { return 1.0 }\nfn h(s) { return 2.0 }\nfn reward(s, instr) { return h(s) }")
        .unwrap_err();
    assert_eq!(err, DslError::Duplicate("h".into()));
}

#[test]
fn undefined_name_is_reported() {
    let err = parse_program("fn reward(s, instr) { return door_open(s, \"red\") }").unwrap_err();
    assert!(err.to_string().contains("door_open"), "{err}");
    let err = parse_program("fn reward(s, instr) { return missing + 1.0 }").unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");
}

#[test]
fn syntax_error_has_line_and_column() {
    let err = parse_program("fn reward(s, instr) {\n    return (1.0 +\n}").unwrap_err();
    let DslError::Parse { line, col, .. } = err else { panic!("{err:?}") };
    assert_eq!(line, 3);
    assert_eq!(col, 1);
}

#[test]
fn recursion_is_rejected() {
    let err = parse_program(
        "fn a(x) { return b(x) }\nfn b(x) { return a(x) }\nfn reward(s, instr) { return a(1.0) }",
    )
    .unwrap_err();
    assert!(matches!(err, DslError::Recursion(_)), "{err:?}");
    let err = parse_program("fn reward(s, instr) { return reward(s, instr) }").unwrap_err();
    assert!(matches!(err, DslError::Recursion(_)), "{err:?}");
}

#[test]
fn entry_point_is_required() {
    assert_eq!(parse_program("fn f(s) { return 1.0 }").unwrap_err(), DslError::MissingEntry);
    assert_eq!(parse_program("fn reward(s) { return 1.0 }").unwrap_err(), DslError::MissingEntry);
}

#[test]
fn static_type_errors() {
    for src in [
        "fn reward(s, instr) { return \"high\" }",
        "fn reward(s, instr) { if 1.0 { return 1.0 } return 0.0 }",
        "fn reward(s, instr) { return manhattan(agent_pos(s), 3.0) }",
        "fn reward(s, instr) { return object_at(s, agent_pos(s)) + 1.0 }",
    ] {
        assert!(matches!(parse_program(src), Err(DslError::Type { .. })), "{src}");
    }
    assert!(matches!(
        parse_program("fn reward(s, instr) { return manhattan(agent_pos(s)) }"),
        Err(DslError::Arity { .. })
    ));
}

#[test]
fn constant_program() {
    let p = parse_program("fn reward(s, instr) { return 100.0 }").unwrap();
    for (s, _) in go_to_states().iter().take(30) {
        assert_eq!(p.evaluate(s).value, Ok(100.0));
    }
}

#[test]
fn go_to_reward_fires_on_expert_final_states() {
    let p = parse_program(GO_TO).unwrap();
    for (s, last) in go_to_states() {
        let v = p.evaluate(&s).value.unwrap();
        if last {
            assert_eq!(v, 100.0);
        } else {
            assert!(v < 1.0 || s.agent_pos().manhattan(s.front_pos()) == 1);
        }
    }
}

#[test]
fn unbounded_loop_hits_budget() {
    let p = parse_program("fn reward(s, instr) { let i = 0.0\n while true { i = i + 1.0 } return i }").unwrap();
    let (s, _) = &go_to_states()[0];
    let r = evaluate(&p, s, &s.instruction, DEFAULT_STEP_BUDGET);
    assert_eq!(r.value, Err(EvalErrorKind::StepBudgetExceeded));
    assert!(r.steps_used <= DEFAULT_STEP_BUDGET);
    assert_eq!(r.reward(), 0.0);
}

#[test]
fn runtime_errors_and_clamping() {
    let (s, _) = &go_to_states()[0];
    let cases = [
        ("fn reward(s, instr) { return 1.0 / 0.0 }", Err(EvalErrorKind::Domain)),
        ("fn reward(s, instr) { return 1e308 * 10.0 }", Err(EvalErrorKind::NonFinite)),
        ("fn reward(s, instr) { return [1.0][3.0] }", Err(EvalErrorKind::Domain)),
        ("fn reward(s, instr) { return -5.0 }", Ok(0.0)),
    ];
    for (src, want) in cases {
        let r = parse_program(src).unwrap().evaluate(s);
        assert_eq!(r.value, want, "{src}");
        assert!(!r.debug_trace.is_empty(), "{src}");
    }
    let r = parse_program("fn reward(s, instr) { return -5.0 }").unwrap().evaluate(s);
    assert!(r.debug_trace[0].contains("domain warning"));
}

#[test]
fn untyped_helper_argument_checked_at_runtime() {
    let p = parse_program("fn h(a) { return manhattan(a, a) }\nfn reward(s, instr) { return h(3.0) }").unwrap();
    let (s, _) = &go_to_states()[0];
    assert_eq!(p.evaluate(s).value, Err(EvalErrorKind::Type));
}

#[test]
fn debug_trace_is_in_execution_order() {
    let p = parse_program(
        "fn reward(s, instr) {\n debug(\"start\", width(s))\n for i in [1.0, 2.0] { debug(i) }\n return 0.5 }",
    )
    .unwrap();
    let (s, _) = &go_to_states()[0];
    let r = p.evaluate(s);
    assert_eq!(r.debug_trace, vec!["start 6.0", "1.0", "2.0"]);
}

#[test]
fn instruction_argument_is_independent_of_state() {
    let p = parse_program("fn reward(s, instr) { if instr_contains(instr, \"ball\") { return 100.0 } return 0.0 }")
        .unwrap();
    let (s, _) = &go_to_states()[0];
    assert_eq!(evaluate(&p, s, "go to the red ball", 1000).value, Ok(100.0));
    assert_eq!(evaluate(&p, s, "go to the red key", 1000).value, Ok(0.0));
}

#[test]
fn evaluation_is_pure() {
    let p = parse_program(GO_TO).unwrap();
    let states = go_to_states();
    for (s, _) in states.iter().step_by(7) {
        let first = p.evaluate(s);
        for _ in 0..1000 {
            assert_eq!(p.evaluate(s), first);
        }
    }
}

#[test]
fn canonical_source_round_trips() {
    let p = parse_program(GO_TO).unwrap();
    let again = parse_program(&p.source).unwrap();
    assert_eq!(again.program, p.program);
    assert_eq!(again.source, p.source);
    assert_eq!(print_program(&parse_unchecked(&p.source).unwrap()), p.source);
}

#[test]
fn helper_hash_ignores_names_and_whitespace() {
    let a = parse_program(
        "fn near(st, o, c) { for p in find_all(st, o, c) { if adjacent(p, agent_pos(st)) { return true } } return false }\n\
         fn reward(s, instr) { if near(s, \"ball\", \"red\") { return 100.0 } return 0.0 }",
    )
    .unwrap();
    let b = parse_program(
        "fn close_to(state,obj,col){for q in find_all(state,obj,col){if adjacent(q,agent_pos(state)){return true}}\nreturn false}\n\
         fn reward(s, instr) { if close_to(s, \"key\", \"blue\") { return 100.0 } return 0.1 }",
    )
    .unwrap();
    let c = parse_program(
        "fn near(st, o, c) { for p in find_all(st, o, c) { if manhattan(p, agent_pos(st)) <= 2.0 { return true } } return false }\n\
         fn reward(s, instr) { if near(s, \"ball\", \"red\") { return 100.0 } return 0.0 }",
    )
    .unwrap();
    assert_eq!(a.helpers[0].1, b.helpers[0].1);
    assert_ne!(a.helpers[0].1, c.helpers[0].1);
    let inv = helper_inventory([&a, &b, &c]);
    assert_eq!(inv.len(), 2);
    assert_eq!(inv[&a.helpers[0].1], 2);
}

#[test]
fn helper_hash_tracks_callee_bodies() {
    let base = |k: &str| {
        format!(
            "fn inner(x) {{ return x + {k} }}\nfn outer(y) {{ return inner(y) * 2.0 }}\n\
             fn reward(s, instr) {{ return outer(1.0) }}"
        )
    };
    let a = parse_program(&base("1.0")).unwrap();
    let b = parse_program(&base("2.0")).unwrap();
    let outer = |p: &evoreward::dsl::RewardProgram| p.helpers.iter().find(|(n, _)| n == "outer").unwrap().1.clone();
    assert_ne!(outer(&a), outer(&b));
}

#[test]
fn call_counts() {
    let p = parse_program(
        "fn h(x) { return x }\nfn g(x) { return h(x) + h(x) }\nfn reward(s, instr) { return g(1.0) + h(2.0) }",
    )
    .unwrap();
    let counts = p.helper_call_counts();
    assert_eq!(counts["h"], 3);
    assert_eq!(counts["g"], 1);
}

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "pos_x", "total", "k9"]).prop_map(String::from)
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-50i32..50).prop_map(|v| Expr::Num(v as f64 / 4.0)),
        any::<bool>().prop_map(Expr::Bool),
        "[a-z ]{0,6}".prop_map(Expr::Str),
        ident().prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let ops = prop::sample::select(vec![
            BinOp::Or,
            BinOp::And,
            BinOp::Eq,
            BinOp::Ne,
            BinOp::Lt,
            BinOp::Le,
            BinOp::Gt,
            BinOp::Ge,
            BinOp::Add,
            BinOp::Sub,
            BinOp::Mul,
            BinOp::Div,
            BinOp::Rem,
        ]);
        prop_oneof![
            (ops, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::bin(op, l, r)),
            inner
                .clone()
                .prop_filter("negated literal folds", |e| !matches!(e, Expr::Num(_)))
                .prop_map(|e| Expr::Unary(UnOp::Neg, Box::new(e))),
            inner.clone().prop_map(|e| Expr::Unary(UnOp::Not, Box::new(e))),
            (inner.clone(), any::<bool>())
                .prop_map(|(e, x)| Expr::Field(Box::new(e), if x { Field::X } else { Field::Y })),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Index(Box::new(a), Box::new(b))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Expr::List),
            prop::collection::vec(inner, 0..3).prop_map(|args| Expr::Call("f".into(), args)),
        ]
    })
}

fn parse_expr(text: &str) -> Expr {
    let p = parse_unchecked(&format!("fn reward(s, instr) {{ return {text} }}")).unwrap();
    match &p.functions[0].body[0] {
        evoreward::dsl::Stmt::Return(e) => e.clone(),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn printed_expressions_parse_back(e in expr()) {
        let text = print_expr(&e);
        prop_assert_eq!(parse_expr(&text), e, "{}", text);
    }

    #[test]
    fn helper_hash_is_alpha_invariant(
        names in prop::collection::hash_set("[a-z][a-z0-9_]{0,6}", 5),
        k in 0u32..20,
    ) {
        let reserved = ["fn", "let", "if", "else", "for", "in", "while", "return", "true", "false", "and", "or", "not",
            "debug", "reward", "s", "instr"];
        prop_assume!(names.iter().all(|n| !reserved.contains(&n.as_str()) && evoreward::dsl::builtin(n).is_none()));
        let n: Vec<&String> = names.iter().collect();
        let body = |f: &str, st: &str, o: &str, acc: &str, p: &str| format!(
            "fn {f}({st}, {o}) {{\n let {acc} = 0.0\n for {p} in find_all({st}, {o}, \"any\") {{ {acc} = {acc} + manhattan({p}, agent_pos({st})) }}\n return {acc} + {k}.0\n}}\n\
             fn reward(s, instr) {{ return min(100.0, {f}(s, \"ball\")) }}"
        );
        let a = parse_program(&body("helper", "state", "obj", "total", "p")).unwrap();
        let b = parse_program(&body(n[0], n[1], n[2], n[3], n[4])).unwrap();
        prop_assert_eq!(&a.helpers[0].1, &b.helpers[0].1);
        let c = parse_program(&body(n[0], n[1], n[2], n[3], n[4]).replace(&format!("+ {k}.0"), &format!("+ {}.0", k + 1))).unwrap();
        prop_assert_ne!(&a.helpers[0].1, &c.helpers[0].1);
    }
}
