//! Lowering to the calculus.
//!
//! Every `new C("id", up1, ...)` becomes an object literal and registers `id`
//! in the initial resolver. The `main` block becomes one expression: a
//! sequence of its statements, each reduced by the explicit rules in turn.
//! `let` bindings are resolved statically, so they leave no trace in the
//! lowered term.

use std::collections::{BTreeMap, BTreeSet};

use zdps_core::calculus::{MethodDef, ObjectLit};
use zdps_core::engine::explicit_step;
use zdps_core::env::{IdentEnv, ProcEnv, ResolverEntry};
use zdps_core::store::Relation;
use zdps_core::{EngineError, Expr, Ident, MachineState};

use crate::annotate::{infer_and_check_annotations, ClassTiming};
use crate::ast::{ClassDecl, Program, SExpr, Stmt};
use crate::timing::{seconds_to_ticks, TimingSpec};
use crate::DslError;

/// Value of a signal before its first record.
pub const INIT: &str = "l_init";

#[derive(Clone, Debug)]
pub struct Lowered {
    pub mu: IdentEnv,
    pub expr: Expr,
    /// Instances whose class asks for checkpoints, with the interval in ticks.
    pub checkpoint_intervals: BTreeMap<Ident, u64>,
    /// Source instances of `anytime` classes, explicit or by default.
    pub anytime_sources: BTreeSet<Ident>,
    pub timings: BTreeMap<String, ClassTiming>,
    /// Instances in creation order with their class.
    pub instances: Vec<(Ident, String)>,
    /// Per source instance, the persistent signals with no initializer.
    /// These are the columns an external feed is expected to fill.
    pub inputs: BTreeMap<Ident, Vec<String>>,
}

impl Lowered {
    /// Machine state at tick zero over an empty network.
    ///
    /// With `prebuild`, the leading object literals of the script are
    /// reduced at tick zero without propagating and the clock starts at one.
    /// The network they build is then the snapshot at zero, and the first
    /// tick already propagates over it.
    pub fn initial_state(&self, prebuild: bool) -> Result<MachineState, EngineError> {
        let mut s = MachineState::new(self.mu.clone(), ProcEnv::new(), self.expr.clone());
        if !prebuild {
            return Ok(s);
        }
        while leading_literal(&s.expr) {
            let r = explicit_step(&s.mu, s.t, &s.nu, &s.phi, &s.expr)?;
            s.nu = r.nu;
            s.phi = r.phi;
            s.expr = r.expr;
        }
        s.t = 1;
        Ok(s)
    }
}

fn leading_literal(e: &Expr) -> bool {
    match e {
        Expr::Object(_) => true,
        Expr::Seq(items) => matches!(items.first(), Some(Expr::Object(_))),
        _ => false,
    }
}

/// A lowered expression and, when known, the class of the instance it names.
type Typed = (Expr, Option<String>);

enum Scope<'a> {
    Class { decl: &'a ClassDecl, this: Expr },
    Main(&'a BTreeMap<String, Typed>),
}

struct Lowerer<'a> {
    program: &'a Program,
    tick_seconds: u64,
    timings: BTreeMap<String, ClassTiming>,
    out: Lowered,
}

fn literal_init(c: &ClassDecl, init: Option<&SExpr>) -> String {
    match init {
        Some(SExpr::Name(n)) if !c.has_signal(n) && c.slot_class(n).is_none() => n.clone(),
        Some(SExpr::Number(n)) | Some(SExpr::Str(n)) => n.clone(),
        _ => INIT.to_string(),
    }
}

impl<'a> Lowerer<'a> {
    fn class(&self, name: &str) -> Result<&'a ClassDecl, DslError> {
        self.program
            .class(name)
            .ok_or_else(|| DslError::UnknownClass(name.to_string()))
    }

    fn expr(&mut self, scope: &Scope<'_>, e: &SExpr) -> Result<Typed, DslError> {
        Ok(match e {
            SExpr::Number(n) | SExpr::Str(n) => (Expr::id(n), None),
            SExpr::Name(n) => match scope {
                Scope::Class { decl, this } => {
                    if decl.has_signal(n) {
                        (this.clone().signal(n), None)
                    } else if let Some(cls) = decl.slot_class(n) {
                        (this.clone().upstream(n), Some(cls.to_string()))
                    } else {
                        (Expr::id(n), None)
                    }
                }
                Scope::Main(vars) => vars
                    .get(n)
                    .cloned()
                    .ok_or_else(|| DslError::UnknownVariable(n.clone()))?,
            },
            SExpr::This => match scope {
                Scope::Class { decl, this } => (this.clone(), Some(decl.name.clone())),
                Scope::Main(_) => return Err(DslError::UnknownVariable("this".into())),
            },
            SExpr::Member(r, f) => {
                let (re, cls) = self.expr(scope, r)?;
                let unknown = |class: String| DslError::UnknownMember {
                    class,
                    member: f.clone(),
                };
                let cls = cls.ok_or_else(|| unknown(r.to_string()))?;
                let decl = self.class(&cls)?;
                if decl.has_signal(f) {
                    (re.signal(f), None)
                } else if let Some(up) = decl.slot_class(f) {
                    (re.upstream(f), Some(up.to_string()))
                } else {
                    return Err(unknown(cls));
                }
            }
            SExpr::Call { recv, name, args } => {
                let recv = match recv {
                    Some(r) => Some(self.expr(scope, r)?),
                    None => None,
                };
                let mut lowered = Vec::with_capacity(args.len() + 1);
                for a in args {
                    lowered.push(self.expr(scope, a)?.0);
                }
                match recv {
                    Some((re, _)) if name == "setUpstreams" => (re.setu(lowered), None),
                    Some((re, Some(cls))) if args.is_empty() && self.class(&cls)?.has_method(name) => {
                        (re.method(name), None)
                    }
                    Some((re, _)) => {
                        lowered.insert(0, re);
                        (Expr::apply(name, lowered), None)
                    }
                    None => match scope {
                        Scope::Class { decl, this } if args.is_empty() && decl.has_method(name) => {
                            (this.clone().method(name), None)
                        }
                        _ => (Expr::apply(name, lowered), None),
                    },
                }
            }
            SExpr::Binary(op, l, r) => {
                let l = self.expr(scope, l)?.0;
                let r = self.expr(scope, r)?.0;
                (Expr::apply(op.combinator(), vec![l, r]), None)
            }
            SExpr::Unary(op, x) => (Expr::apply(op.combinator(), vec![self.expr(scope, x)?.0]), None),
            SExpr::New { class, args } => match scope {
                Scope::Main(_) => self.new_instance(scope, class, args)?,
                Scope::Class { .. } => return Err(DslError::BadNew("`new` inside a class body".into())),
            },
        })
    }

    fn new_instance(&mut self, scope: &Scope<'_>, class: &str, args: &[SExpr]) -> Result<Typed, DslError> {
        let decl = self.class(class)?;
        let label = match args.first() {
            Some(SExpr::Str(s)) if !s.is_empty() => Ident::new(s),
            _ => return Err(DslError::BadNew(format!("`new {class}` needs a string id first"))),
        };
        if self.out.mu.contains(&label) {
            return Err(DslError::DuplicateId(label.as_str().to_string()));
        }
        let ups = &args[1..];
        if ups.len() != decl.upstreams.len() {
            return Err(DslError::ArityMismatch {
                class: class.to_string(),
                expected: decl.upstreams.len(),
                found: ups.len(),
            });
        }
        let mut upstreams = Vec::with_capacity(ups.len());
        for ((slot, want), a) in decl.upstreams.iter().zip(ups) {
            let (e, got) = self.expr(scope, a)?;
            if let Some(got) = got {
                if &got != want {
                    return Err(DslError::SlotClassMismatch {
                        class: class.to_string(),
                        slot: slot.clone(),
                        expected: want.clone(),
                        found: got,
                    });
                }
            }
            upstreams.push((slot.clone(), e));
        }

        let this = Expr::Id(label.clone());
        let effect_scope = Scope::Class {
            decl,
            this: this.clone(),
        };
        let mut signals = Vec::new();
        let mut initial = Vec::new();
        for (n, init) in &decl.persistent {
            let e = match init {
                Some(x) => self.expr(&effect_scope, x)?.0,
                None => this.clone().signal(n),
            };
            signals.push((n.clone(), e));
            initial.push(Ident::new(literal_init(decl, init.as_ref())));
        }
        for (n, x) in &decl.derived {
            signals.push((n.clone(), self.expr(&effect_scope, x)?.0));
            initial.push(Ident::new(literal_init(decl, Some(x))));
        }
        let method_scope = Scope::Class {
            decl,
            this: Expr::var("this"),
        };
        let mut methods = Vec::new();
        for (n, body) in &decl.methods {
            methods.push(MethodDef::new(n, "this", self.expr(&method_scope, body)?.0));
        }

        let schema = signals.iter().map(|(n, _)| n.clone()).collect();
        let relation = Relation::new(schema, initial).expect("one initial value per signal");
        let entry = ResolverEntry {
            relation,
            tm: self.timings[class].tm,
            mode: decl.mode(),
        };
        self.out
            .mu
            .register(label.clone(), entry)
            .expect("periods are at least one tick");
        if let Some(secs) = decl.checkpoint_interval {
            let ticks = seconds_to_ticks(secs, self.tick_seconds)?;
            self.out.checkpoint_intervals.insert(label.clone(), ticks);
        }
        if decl.upstreams.is_empty() && decl.timing.is_none_or(|t| t == TimingSpec::Anytime) {
            self.out.anytime_sources.insert(label.clone());
        }
        if decl.upstreams.is_empty() {
            let inputs: Vec<String> = decl
                .persistent
                .iter()
                .filter(|(_, init)| init.is_none())
                .map(|(n, _)| n.clone())
                .collect();
            if !inputs.is_empty() {
                self.out.inputs.insert(label.clone(), inputs);
            }
        }
        self.out.instances.push((label.clone(), class.to_string()));
        Ok((
            Expr::Object(ObjectLit {
                label,
                signals,
                upstreams,
                methods,
            }),
            Some(class.to_string()),
        ))
    }
}

/// Lower a parsed program with `tick_seconds` per logical tick.
pub fn lower(program: &Program, tick_seconds: u64) -> Result<Lowered, DslError> {
    let timings = infer_and_check_annotations(&program.classes, tick_seconds)?;
    let mut lw = Lowerer {
        program,
        tick_seconds,
        timings: timings.clone(),
        out: Lowered {
            mu: IdentEnv::new(),
            expr: Expr::id("unit"),
            checkpoint_intervals: BTreeMap::new(),
            anytime_sources: BTreeSet::new(),
            timings,
            instances: Vec::new(),
            inputs: BTreeMap::new(),
        },
    };
    let mut vars: BTreeMap<String, Typed> = BTreeMap::new();
    let mut stmts = Vec::new();
    for s in &program.main {
        match s {
            Stmt::Let { name, value } => {
                let (e, cls) = lw.expr(&Scope::Main(&vars), value)?;
                let bound = match e {
                    Expr::Object(ref o) => {
                        let id = Expr::Id(o.label.clone());
                        stmts.push(e);
                        id
                    }
                    other => other,
                };
                vars.insert(name.clone(), (bound, cls));
            }
            Stmt::Expr(x) => stmts.push(lw.expr(&Scope::Main(&vars), x)?.0),
        }
    }
    lw.out.expr = match stmts.len() {
        0 => Expr::id("unit"),
        1 => stmts.pop().unwrap(),
        _ => Expr::Seq(stmts),
    };
    Ok(lw.out)
}
