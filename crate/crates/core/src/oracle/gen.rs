//! Random well-formed machine states for the property oracles.

use std::collections::BTreeSet;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{Expr, Ident, MethodDef, Mode, ObjectLit, Process, ProcessBody};
use crate::consistency::expected_tm;
use crate::engine::{step_in_place, Delivery, MachineState};
use crate::env::{IdentEnv, ProcEnv, ResolverEntry};
use crate::feed::ConstantFeed;
use crate::store::Relation;

const TMS: [u64; 6] = [1, 2, 3, 4, 6, 12];

/// The spare resolver entry used by creation steps.
pub const SPARE: &str = "x0";

#[derive(Clone, Debug)]
pub struct Case {
    pub state: MachineState,
    /// Instances given a pre-existing row at the current tick.
    pub stray: BTreeSet<Ident>,
}

fn node(i: usize) -> Ident {
    Ident::new(format!("n{i}"))
}

fn pick_mode(rng: &mut ChaCha8Rng) -> Mode {
    if rng.random_bool(0.5) {
        Mode::Union
    } else {
        Mode::Intersection
    }
}

fn cols(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn entry(tm: u64, mode: Mode, ncols: usize) -> ResolverEntry {
    ResolverEntry {
        relation: Relation::new(cols(ncols), vec![Ident::new("init"); ncols]).unwrap(),
        tm,
        mode,
    }
}

fn effects(rng: &mut ChaCha8Rng, me: &Ident, nslots: usize, ncols: usize) -> Vec<(String, Expr)> {
    let own = |p: &str| Expr::Id(me.clone()).signal(p);
    let slot = |k: usize| Expr::Id(me.clone()).upstream(format!("s{k}")).signal("p0");
    let mut out = Vec::new();
    let first = if nslots == 0 {
        if rng.random_bool(0.5) {
            Expr::apply("tick", vec![own("p0")])
        } else {
            Expr::id(format!("c{me}"))
        }
    } else {
        let mut args: Vec<Expr> = (0..nslots).map(slot).collect();
        if rng.random_bool(0.3) {
            args.push(own("p0"));
        }
        Expr::apply("f", args)
    };
    out.push(("p0".to_string(), first));
    if ncols > 1 {
        let mut args = vec![own("p0")];
        if nslots > 0 {
            args.push(slot(0));
        }
        out.push(("p1".to_string(), Expr::apply("g", args)));
    }
    out
}

fn methods(nslots: usize) -> Vec<MethodDef> {
    let mut m = vec![MethodDef::new("get", "x", Expr::var("x").signal("p0"))];
    if nslots > 0 {
        m.push(MethodDef::new("up", "x", Expr::var("x").upstream("s0").signal("p0")));
    }
    m
}

fn body(rng: &mut ChaCha8Rng, me: &Ident, nslots: usize, ncols: usize) -> ProcessBody {
    ProcessBody {
        out: me.clone(),
        slots: (0..nslots).map(|k| format!("s{k}")).collect(),
        effects: effects(rng, me, nslots, ncols),
        methods: methods(nslots),
    }
}

/// Acyclic by construction: node `i` only reads nodes with a smaller index.
fn network(rng: &mut ChaCha8Rng) -> (IdentEnv, ProcEnv, usize) {
    let n = rng.random_range(2..=8usize);
    let mut mu = IdentEnv::new();
    let mut nu = ProcEnv::new();
    for i in 0..n {
        let me = node(i);
        let ncols = rng.random_range(1..=2usize);
        let nin = if i == 0 || rng.random_bool(0.35) {
            0
        } else {
            rng.random_range(1..=i.min(3))
        };
        let mut pool: Vec<usize> = (0..i).collect();
        let mut inputs = Vec::new();
        for _ in 0..nin {
            let k = rng.random_range(0..pool.len());
            inputs.push(node(pool.swap_remove(k)));
        }
        let mode = pick_mode(rng);
        let tm = if inputs.is_empty() {
            TMS[rng.random_range(0..TMS.len())]
        } else {
            let tms: Vec<u64> = inputs.iter().map(|l| mu.tm(l).unwrap()).collect();
            expected_tm(mode, &tms).unwrap()
        };
        mu.register(me.clone(), entry(tm, mode, ncols)).unwrap();
        let b = body(rng, &me, inputs.len(), ncols);
        nu.bind(me, Process::with_inputs(mode, inputs, b));
    }
    mu.register(Ident::new(SPARE), entry(1, Mode::Union, 1)).unwrap();
    (mu, nu, n)
}

fn guarded(nu: &ProcEnv) -> Vec<(Ident, usize)> {
    nu.iter()
        .filter(|(_, p)| matches!(p, Process::Guarded(..)))
        .map(|(id, p)| (id.clone(), p.inputs().len()))
        .collect()
}

fn index(l: &Ident) -> usize {
    l.as_str()[1..].parse().unwrap()
}

/// A well-timed switch of some guarded node to other earlier nodes.
fn random_switch(rng: &mut ChaCha8Rng, mu: &IdentEnv, nu: &ProcEnv) -> Option<Expr> {
    let gs = guarded(nu);
    if gs.is_empty() {
        return None;
    }
    for _ in 0..10 {
        let (g, arity) = gs[rng.random_range(0..gs.len())].clone();
        let below = index(&g);
        let inputs: Vec<Ident> = (0..arity).map(|_| node(rng.random_range(0..below))).collect();
        let tms: Vec<u64> = inputs.iter().map(|l| mu.tm(l).unwrap()).collect();
        if expected_tm(mu.mode(&g).unwrap(), &tms) == mu.tm(&g) {
            return Some(Expr::Id(g).setu(inputs.into_iter().map(Expr::Id).collect()));
        }
    }
    None
}

fn spare_literal(rng: &mut ChaCha8Rng, mu: &mut IdentEnv, inputs: Vec<Ident>, tm: Option<u64>) -> Expr {
    let me = Ident::new(SPARE);
    let mode = pick_mode(rng);
    let tm = match tm {
        Some(tm) => tm,
        None if inputs.is_empty() => TMS[rng.random_range(0..TMS.len())],
        None => {
            let tms: Vec<u64> = inputs.iter().map(|l| mu.tm(l).unwrap()).collect();
            expected_tm(mode, &tms).unwrap()
        }
    };
    mu.register(me.clone(), entry(tm, mode, 1)).unwrap();
    let b = body(rng, &me, inputs.len(), 1);
    Expr::Object(ObjectLit {
        label: me,
        signals: b.effects,
        upstreams: inputs
            .into_iter()
            .enumerate()
            .map(|(k, l)| (format!("s{k}"), Expr::Id(l)))
            .collect(),
        methods: b.methods,
    })
}

fn final_expr(rng: &mut ChaCha8Rng, mu: &mut IdentEnv, nu: &ProcEnv, n: usize) -> Expr {
    let any = |rng: &mut ChaCha8Rng| Expr::Id(node(rng.random_range(0..n)));
    let gs = guarded(nu);
    match rng.random_range(0..7u8) {
        0 => any(rng),
        1 => any(rng).signal("p0"),
        2 => any(rng).method("get"),
        3 if !gs.is_empty() => {
            let g = gs[rng.random_range(0..gs.len())].0.clone();
            Expr::Id(g).upstream("s0").signal("p0")
        }
        4 => {
            let k = rng.random_range(0..=2usize.min(n));
            let inputs = (0..k).map(|_| node(rng.random_range(0..n))).collect();
            spare_literal(rng, mu, inputs, None)
        }
        5 => random_switch(rng, mu, nu).unwrap_or_else(|| any(rng)),
        6 if !gs.is_empty() => {
            let (g, arity) = gs[rng.random_range(0..gs.len())].clone();
            let current = nu.inputs(&g).to_vec();
            let k = rng.random_range(0..arity);
            let lit = spare_literal(rng, mu, vec![], mu.tm(&current[k]));
            let args = current
                .into_iter()
                .enumerate()
                .map(|(i, l)| if i == k { lit.clone() } else { Expr::Id(l) })
                .collect();
            Expr::Id(g).setu(args)
        }
        _ => any(rng).signal("p0"),
    }
}

/// Build a random state at a fresh tick: a network, a short lossy history
/// and a driver expression for the next step.
pub fn random_case(rng: &mut ChaCha8Rng, with_stray: bool) -> Option<Case> {
    let (mu, nu, n) = network(rng);
    let mut s = MachineState::new(mu, nu, Expr::id("v"));
    let ticks = if rng.random_bool(0.4) { 12 } else { rng.random_range(1..=13u64) };
    for _ in 0..ticks {
        s.expr = if rng.random_bool(0.15) {
            random_switch(rng, &s.mu, &s.nu).unwrap_or_else(|| Expr::id("v"))
        } else {
            Expr::id("v")
        };
        let delivery = if rng.random_bool(0.5) {
            Delivery::Full
        } else {
            Delivery::Only((0..n).filter(|_| rng.random_bool(0.7)).map(node).collect())
        };
        step_in_place(&mut s, &delivery, &ConstantFeed).ok()?;
    }
    s.expr = final_expr(rng, &mut s.mu, &s.nu, n);
    let mut stray = BTreeSet::new();
    if with_stray {
        let t = s.t;
        let ids: Vec<Ident> = s.mu.ids().cloned().collect();
        for id in ids {
            let e = s.mu.get_mut(&id).unwrap();
            if t % e.tm == 0 && rng.random_bool(0.25) {
                let width = e.relation.schema().len();
                e.relation.insert(t, vec![Ident::new("stray"); width]).unwrap();
                stray.insert(id);
            }
        }
    }
    Some(Case { state: s, stray })
}
