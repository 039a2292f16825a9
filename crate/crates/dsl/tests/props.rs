use proptest::prelude::*;
use zdps_core::env::check_acyclic;
use zdps_core::{Ident, Timestamp};
use zdps_dsl::{compile, parse_expr, SExpr};

// Names carry a prefix so they never collide with keywords.
fn name() -> impl Strategy<Value = String> {
    "[a-z]{0,4}".prop_map(|s| format!("x{s}"))
}

fn leaf() -> impl Strategy<Value = SExpr> {
    prop_oneof![
        name().prop_map(SExpr::Name),
        (0u32..1000).prop_map(|n| SExpr::Number(n.to_string())),
        "[a-z \"]{0,5}".prop_map(SExpr::Str),
        Just(SExpr::This),
    ]
}

fn expr() -> impl Strategy<Value = SExpr> {
    use zdps_dsl::ast::{BinOp, UnOp};
    let ops = [
        BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Lt, BinOp::Gt,
        BinOp::Le, BinOp::Ge, BinOp::Eq, BinOp::Ne, BinOp::And, BinOp::Or,
    ];
    leaf().prop_recursive(4, 32, 3, move |inner| {
        prop_oneof![
            (inner.clone(), name()).prop_map(|(r, n)| SExpr::Member(Box::new(r), n)),
            (proptest::option::of(inner.clone()), name(), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(r, name, args)| SExpr::Call { recv: r.map(Box::new), name, args }),
            (prop::sample::select(ops.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| SExpr::Binary(op, Box::new(l), Box::new(r))),
            (prop::sample::select(vec![UnOp::Not, UnOp::Neg]), inner.clone())
                .prop_map(|(op, e)| SExpr::Unary(op, Box::new(e))),
            ("[A-Z][a-z]{0,3}", prop::collection::vec(inner, 0..3))
                .prop_map(|(class, args)| SExpr::New { class, args }),
        ]
    })
}

/// Parents of each node, all earlier than the node itself.
fn dag() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1usize..10).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    Just(vec![]).boxed()
                } else {
                    prop::collection::vec(0..i, 0..3).boxed()
                }
            })
            .collect::<Vec<_>>()
    })
}

/// One class per node so every slot names the exact class of its parent.
fn program(parents: &[Vec<usize>]) -> String {
    let mut src = String::new();
    for (i, ps) in parents.iter().enumerate() {
        src.push_str(&format!("signal class C{i} {{\n"));
        for (k, p) in ps.iter().enumerate() {
            src.push_str(&format!("  C{p} u{k};\n"));
        }
        if ps.is_empty() {
            src.push_str(&format!("  persistent signal v = {i};\n"));
        } else {
            let args: Vec<String> = (0..ps.len()).map(|k| format!("u{k}.v")).collect();
            src.push_str(&format!("  signal v = f({});\n", args.join(", ")));
        }
        src.push_str("}\n");
    }
    src.push_str("main {\n");
    for (i, ps) in parents.iter().enumerate() {
        let mut args = vec![format!("\"n{i}\"")];
        args.extend(ps.iter().map(|p| format!("n{p}")));
        src.push_str(&format!("  let n{i} = new C{i}({});\n", args.join(", ")));
    }
    src.push_str("}\n");
    src
}

proptest! {
    #[test]
    fn expressions_round_trip_through_the_printer(e in expr()) {
        let printed = e.to_string();
        prop_assert_eq!(parse_expr(&printed).unwrap(), e, "{}", printed);
    }

    #[test]
    fn lowering_keeps_the_wiring(parents in dag()) {
        let src = program(&parents);
        let l = compile(&src, 1).unwrap();
        let s = l.initial_state(true).unwrap();
        let nu = s.phi.at(Timestamp::At(0)).unwrap();
        prop_assert_eq!(nu.len(), parents.len());
        prop_assert!(check_acyclic(nu));
        for (i, ps) in parents.iter().enumerate() {
            let want: Vec<Ident> = ps.iter().map(|p| Ident::new(&format!("n{p}"))).collect();
            prop_assert_eq!(nu.inputs(&Ident::new(&format!("n{i}"))), &want[..]);
        }
    }
}
