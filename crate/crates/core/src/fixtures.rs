//! Small hand-built networks shared by tests and examples.

use crate::calculus::{Expr, Ident, Join, Mode, Process, ProcessBody};
use crate::env::{IdentEnv, ProcEnv, ResolverEntry};
use crate::store::Relation;

fn entry(col: &str, init: &str, tm: u64, mode: Mode) -> ResolverEntry {
    ResolverEntry {
        relation: Relation::new(vec![col.into()], vec![init.into()]).unwrap(),
        tm,
        mode,
    }
}

fn source(id: &str, col: &str, value: &str) -> Process {
    Process::Source(ProcessBody {
        out: id.into(),
        slots: vec![],
        effects: vec![(col.into(), Expr::id(value))],
        methods: vec![],
    })
}

/// `f(self.s1.p1, self.s2.p2)` over the two slots.
fn combine(id: &str, f: &str, slots: [(&str, &str); 2]) -> Expr {
    Expr::apply(
        f,
        slots
            .iter()
            .map(|(s, p)| Expr::id(id).upstream(*s).signal(*p))
            .collect(),
    )
}

fn guarded(id: &str, mode: Mode, col: &str, f: &str, slots: [(&str, &str, &str); 2]) -> Process {
    Process::Guarded(
        Join {
            kind: mode,
            inputs: slots.iter().map(|(_, l, _)| Ident::new(l)).collect(),
        },
        ProcessBody {
            out: id.into(),
            slots: slots.iter().map(|(s, _, _)| s.to_string()).collect(),
            effects: vec![(col.into(), combine(id, f, [(slots[0].0, slots[0].2), (slots[1].0, slots[1].2)]))],
            methods: vec![],
        },
    )
}

/// Resolver for the five-node example: sources `l1`, `l2`, `l4`, a union
/// `l3` over `l1, l2` and an intersection `l5` over `l3, l4`, all at one
/// tick. `l6` is reserved for a later source.
pub fn five_node_resolver() -> IdentEnv {
    let mut mu = IdentEnv::new();
    let mut reg = |id: &str, col: &str, init: &str, mode: Mode| {
        mu.register(id.into(), entry(col, init, 1, mode)).unwrap();
    };
    reg("l1", "a", "la", Mode::Union);
    reg("l2", "b", "lb", Mode::Union);
    reg("l3", "c", "l_init", Mode::Union);
    reg("l4", "d", "ld", Mode::Union);
    reg("l5", "e", "l_init", Mode::Intersection);
    reg("l6", "d", "ld'", Mode::Union);
    mu
}

pub fn five_node_network() -> ProcEnv {
    let mut nu = ProcEnv::new();
    nu.bind("l1".into(), source("l1", "a", "la"));
    nu.bind("l2".into(), source("l2", "b", "lb"));
    nu.bind(
        "l3".into(),
        guarded("l3", Mode::Union, "c", "m", [("a", "l1", "a"), ("b", "l2", "b")]),
    );
    nu.bind("l4".into(), source("l4", "d", "ld"));
    nu.bind(
        "l5".into(),
        guarded("l5", Mode::Intersection, "e", "n", [("c", "l3", "c"), ("d", "l4", "d")]),
    );
    nu
}

/// The object literal `l6[d = ld']` used by the switching example.
pub fn switch_literal() -> Expr {
    Expr::Object(crate::calculus::ObjectLit {
        label: "l6".into(),
        signals: vec![("d".into(), Expr::id("ld'"))],
        upstreams: vec![],
        methods: vec![],
    })
}
