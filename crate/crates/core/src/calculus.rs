//! Term language: expressions, processes, evaluation contexts.
//!
//! Expressions follow the object calculus extended with persistent signals:
//! signal reads `e.p`, upstream reads `e.s`, method access `e.m`, labeled
//! object literals, `e.setu(..)` and identifiers (the only values). Two
//! extensions are carried for the surface language: an opaque n-ary
//! combinator [`Expr::Apply`] and a statement sequence [`Expr::Seq`].

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Identifier of a signal class instance, or a plain value.
///
/// Values in the calculus are identifiers, so numeric literals and combinator
/// results are interned as identifiers too.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(Arc<str>);

impl Ident {
    pub fn new(name: impl AsRef<str>) -> Self {
        Ident(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident(Arc::from(s))
    }
}

const INTERN_MAX: usize = 64;

/// Deterministic result identifier for an opaque combinator application.
///
/// Short results keep the readable form `f(a;b)`; long ones collapse to
/// `f#<fnv64>` so chained combinators do not grow without bound.
pub fn intern_apply(f: &str, args: &[Ident]) -> Ident {
    let mut s = String::with_capacity(f.len() + 2 + args.len() * 4);
    s.push_str(f);
    s.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        s.push_str(a.as_str());
    }
    s.push(')');
    if s.len() <= INTERN_MAX {
        return Ident::from(s);
    }
    Ident::from(format!("{f}#{:016x}", fnv64(s.as_bytes())))
}

/// 64-bit FNV-1a. Stable across platforms, unlike the std hasher.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Join mode of an instance: fire on any input (`Union`) or on all (`Intersection`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Union,
    Intersection,
}

impl Mode {
    pub fn letter(self) -> char {
        match self {
            Mode::Union => 'U',
            Mode::Intersection => 'I',
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Union => f.write_str("union"),
            Mode::Intersection => f.write_str("intersection"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDef {
    pub name: String,
    pub self_var: String,
    pub body: Expr,
}

impl MethodDef {
    pub fn new(name: impl Into<String>, self_var: impl Into<String>, body: Expr) -> Self {
        MethodDef {
            name: name.into(),
            self_var: self_var.into(),
            body,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectLit {
    pub label: Ident,
    pub signals: Vec<(String, Expr)>,
    pub upstreams: Vec<(String, Expr)>,
    pub methods: Vec<MethodDef>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    /// `e.p`: read a persistent signal.
    Signal(Box<Expr>, String),
    /// `e.s`: read an upstream slot.
    Upstream(Box<Expr>, String),
    /// `e.m`: method access.
    Method(Box<Expr>, String),
    Object(ObjectLit),
    SetUpstreams(Box<Expr>, Vec<Expr>),
    Id(Ident),
    /// Opaque combinator `f(e1, .., en)`; reduces to an interned identifier.
    Apply(String, Vec<Expr>),
    /// Statement sequence; leading values are dropped without a reduction step.
    Seq(Vec<Expr>),
}

impl Expr {
    pub fn id(name: impl AsRef<str>) -> Expr {
        Expr::Id(Ident::new(name))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn signal(self, p: impl Into<String>) -> Expr {
        Expr::Signal(Box::new(self), p.into())
    }

    pub fn upstream(self, s: impl Into<String>) -> Expr {
        Expr::Upstream(Box::new(self), s.into())
    }

    pub fn method(self, m: impl Into<String>) -> Expr {
        Expr::Method(Box::new(self), m.into())
    }

    pub fn setu(self, args: Vec<Expr>) -> Expr {
        Expr::SetUpstreams(Box::new(self), args)
    }

    pub fn apply(f: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Apply(f.into(), args)
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Expr::Id(_))
    }

    pub fn as_value(&self) -> Option<&Ident> {
        match self {
            Expr::Id(l) => Some(l),
            _ => None,
        }
    }

    /// Free variables. A driver expression must have none.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Expr::Signal(r, _) | Expr::Upstream(r, _) | Expr::Method(r, _) => collect_free(r, bound, out),
        Expr::Object(o) => {
            for (_, e) in o.signals.iter().chain(o.upstreams.iter()) {
                collect_free(e, bound, out);
            }
            for m in &o.methods {
                bound.push(m.self_var.clone());
                collect_free(&m.body, bound, out);
                bound.pop();
            }
        }
        Expr::SetUpstreams(r, args) => {
            collect_free(r, bound, out);
            for a in args {
                collect_free(a, bound, out);
            }
        }
        Expr::Id(_) => {}
        Expr::Apply(_, args) | Expr::Seq(args) => {
            for a in args {
                collect_free(a, bound, out);
            }
        }
    }
}

/// Replace free occurrences of `Var(x)` with `Id(l)`.
///
/// Method bodies whose self variable is `x` shadow it and are left alone.
pub fn substitute(body: &Expr, x: &str, l: &Ident) -> Expr {
    let sub = |e: &Expr| substitute(e, x, l);
    match body {
        Expr::Var(y) if y == x => Expr::Id(l.clone()),
        Expr::Var(_) | Expr::Id(_) => body.clone(),
        Expr::Signal(r, p) => Expr::Signal(Box::new(sub(r)), p.clone()),
        Expr::Upstream(r, s) => Expr::Upstream(Box::new(sub(r)), s.clone()),
        Expr::Method(r, m) => Expr::Method(Box::new(sub(r)), m.clone()),
        Expr::Object(o) => Expr::Object(ObjectLit {
            label: o.label.clone(),
            signals: o.signals.iter().map(|(p, e)| (p.clone(), sub(e))).collect(),
            upstreams: o.upstreams.iter().map(|(s, e)| (s.clone(), sub(e))).collect(),
            methods: o
                .methods
                .iter()
                .map(|m| {
                    if m.self_var == x {
                        m.clone()
                    } else {
                        MethodDef::new(m.name.clone(), m.self_var.clone(), sub(&m.body))
                    }
                })
                .collect(),
        }),
        Expr::SetUpstreams(r, args) => Expr::SetUpstreams(Box::new(sub(r)), args.iter().map(sub).collect()),
        Expr::Apply(f, args) => Expr::Apply(f.clone(), args.iter().map(sub).collect()),
        Expr::Seq(items) => Expr::Seq(items.iter().map(sub).collect()),
    }
}

/// Drop leading values of a sequence. `Seq` never has a value at its head
/// once settled, and a one-element sequence is its element.
pub fn settle(e: Expr) -> Expr {
    match e {
        Expr::Seq(mut items) => {
            let keep = items.len().saturating_sub(1);
            let skip = items[..keep].iter().take_while(|e| e.is_value()).count();
            let mut rest = items.split_off(skip);
            match rest.len() {
                0 => Expr::id("unit"),
                1 => rest.pop().unwrap(),
                _ => Expr::Seq(rest),
            }
        }
        other => other,
    }
}

/// Evaluation mode of a pure reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Explicit reduction: signal reads see the state before the current tick.
    Explicit,
    /// Inside a propagation; the set holds the instances fired so far.
    Propagation(BTreeSet<Ident>),
}

/// One layer of an evaluation context, innermost hole position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Signal(String),
    Upstream(String),
    Method(String),
    Apply {
        f: String,
        done: Vec<Ident>,
        rest: Vec<Expr>,
    },
    ObjectSlot {
        label: Ident,
        signals: Vec<(String, Expr)>,
        done: Vec<(String, Ident)>,
        slot: String,
        rest: Vec<(String, Expr)>,
        methods: Vec<MethodDef>,
    },
    SetuRecv(Vec<Expr>),
    SetuArg {
        recv: Ident,
        done: Vec<Ident>,
        rest: Vec<Expr>,
    },
    SeqHead(Vec<Expr>),
}

impl Frame {
    fn is_pure(&self) -> bool {
        matches!(
            self,
            Frame::Signal(_) | Frame::Upstream(_) | Frame::Method(_) | Frame::Apply { .. }
        )
    }

    fn wrap(&self, e: Expr) -> Expr {
        match self {
            Frame::Signal(p) => Expr::Signal(Box::new(e), p.clone()),
            Frame::Upstream(s) => Expr::Upstream(Box::new(e), s.clone()),
            Frame::Method(m) => Expr::Method(Box::new(e), m.clone()),
            Frame::Apply { f, done, rest } => {
                let mut args: Vec<Expr> = done.iter().cloned().map(Expr::Id).collect();
                args.push(e);
                args.extend(rest.iter().cloned());
                Expr::Apply(f.clone(), args)
            }
            Frame::ObjectSlot {
                label,
                signals,
                done,
                slot,
                rest,
                methods,
            } => {
                let mut upstreams: Vec<(String, Expr)> =
                    done.iter().map(|(s, l)| (s.clone(), Expr::Id(l.clone()))).collect();
                upstreams.push((slot.clone(), e));
                upstreams.extend(rest.iter().cloned());
                Expr::Object(ObjectLit {
                    label: label.clone(),
                    signals: signals.clone(),
                    upstreams,
                    methods: methods.clone(),
                })
            }
            Frame::SetuRecv(args) => Expr::SetUpstreams(Box::new(e), args.clone()),
            Frame::SetuArg { recv, done, rest } => {
                let mut args: Vec<Expr> = done.iter().cloned().map(Expr::Id).collect();
                args.push(e);
                args.extend(rest.iter().cloned());
                Expr::SetUpstreams(Box::new(Expr::Id(recv.clone())), args)
            }
            Frame::SeqHead(rest) => {
                let mut items = vec![e];
                items.extend(rest.iter().cloned());
                Expr::Seq(items)
            }
        }
    }
}

/// An expression with a hole. Frames are stored outermost first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalContext(pub Vec<Frame>);

impl EvalContext {
    pub fn hole() -> Self {
        EvalContext(Vec::new())
    }

    pub fn frames(&self) -> &[Frame] {
        &self.0
    }

    pub fn is_hole(&self) -> bool {
        self.0.is_empty()
    }

    /// True if every frame belongs to the pure context grammar.
    pub fn is_pure(&self) -> bool {
        self.0.iter().all(Frame::is_pure)
    }
}

/// Fill the hole of `ctx` with `e`.
pub fn plug(ctx: &EvalContext, e: Expr) -> Expr {
    ctx.0.iter().rev().fold(e, |acc, f| f.wrap(acc))
}

/// True if `e` is an immediate pure redex: member access on an identifier or
/// a combinator over identifiers.
pub fn is_pure_redex(e: &Expr) -> bool {
    match e {
        Expr::Signal(r, _) | Expr::Upstream(r, _) | Expr::Method(r, _) => r.is_value(),
        Expr::Apply(_, args) => args.iter().all(Expr::is_value),
        _ => false,
    }
}

/// True if `e` is an immediate explicit redex (including pure ones).
pub fn is_explicit_redex(e: &Expr) -> bool {
    match e {
        Expr::Object(o) => o.upstreams.iter().all(|(_, e)| e.is_value()),
        Expr::SetUpstreams(r, args) => r.is_value() && args.iter().all(Expr::is_value),
        other => is_pure_redex(other),
    }
}

/// Split `e` into the unique context and immediate redex under `mode`.
///
/// Returns `None` for values and for stuck terms. In explicit mode the
/// context is a (possibly empty) run of explicit frames followed by pure
/// frames; in propagation mode only pure frames are allowed.
pub fn decompose(e: &Expr, mode: &EvalMode) -> Option<(EvalContext, Expr)> {
    let pure_only = matches!(mode, EvalMode::Propagation(_));
    let mut frames = Vec::new();
    let redex = find_redex(e, pure_only, &mut frames)?;
    Some((EvalContext(frames), redex))
}

fn find_redex(e: &Expr, pure_only: bool, frames: &mut Vec<Frame>) -> Option<Expr> {
    match e {
        Expr::Id(_) | Expr::Var(_) => None,
        Expr::Signal(r, name) | Expr::Upstream(r, name) | Expr::Method(r, name) => {
            if r.is_value() {
                return Some(e.clone());
            }
            let frame = match e {
                Expr::Signal(..) => Frame::Signal(name.clone()),
                Expr::Upstream(..) => Frame::Upstream(name.clone()),
                _ => Frame::Method(name.clone()),
            };
            descend(frames, frame, r, true)
        }
        Expr::Apply(f, args) => match args.iter().position(|a| !a.is_value()) {
            None => Some(e.clone()),
            Some(i) => {
                let frame = Frame::Apply {
                    f: f.clone(),
                    done: values(&args[..i]),
                    rest: args[i + 1..].to_vec(),
                };
                descend(frames, frame, &args[i], true)
            }
        },
        Expr::Object(o) => {
            if pure_only {
                return None;
            }
            match o.upstreams.iter().position(|(_, a)| !a.is_value()) {
                None => Some(e.clone()),
                Some(i) => {
                    let frame = Frame::ObjectSlot {
                        label: o.label.clone(),
                        signals: o.signals.clone(),
                        done: o.upstreams[..i]
                            .iter()
                            .map(|(s, a)| (s.clone(), a.as_value().cloned().unwrap()))
                            .collect(),
                        slot: o.upstreams[i].0.clone(),
                        rest: o.upstreams[i + 1..].to_vec(),
                        methods: o.methods.clone(),
                    };
                    descend(frames, frame, &o.upstreams[i].1, false)
                }
            }
        }
        Expr::SetUpstreams(r, args) => {
            if pure_only {
                return None;
            }
            let recv = match r.as_value() {
                Some(l) => l.clone(),
                None => return descend(frames, Frame::SetuRecv(args.clone()), r, false),
            };
            match args.iter().position(|a| !a.is_value()) {
                None => Some(e.clone()),
                Some(i) => {
                    let frame = Frame::SetuArg {
                        recv,
                        done: values(&args[..i]),
                        rest: args[i + 1..].to_vec(),
                    };
                    descend(frames, frame, &args[i], false)
                }
            }
        }
        Expr::Seq(items) => {
            if pure_only || items.is_empty() {
                return None;
            }
            descend(frames, Frame::SeqHead(items[1..].to_vec()), &items[0], false)
        }
    }
}

fn descend(frames: &mut Vec<Frame>, frame: Frame, inner: &Expr, pure_only: bool) -> Option<Expr> {
    frames.push(frame);
    let found = find_redex(inner, pure_only, frames);
    if found.is_none() {
        frames.pop();
    }
    found
}

fn values(es: &[Expr]) -> Vec<Ident> {
    es.iter().map(|e| e.as_value().cloned().unwrap()).collect()
}

/// Input join of a guarded process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Join {
    pub kind: Mode,
    pub inputs: Vec<Ident>,
}

/// Everything a process carries besides its guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessBody {
    pub out: Ident,
    /// Upstream slot names; slot `i` reads join input `i`.
    pub slots: Vec<String>,
    /// Effects, one per persistent signal column, in schema order.
    pub effects: Vec<(String, Expr)>,
    pub methods: Vec<MethodDef>,
}

impl ProcessBody {
    pub fn method(&self, name: &str) -> Option<&MethodDef> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Process {
    Guarded(Join, ProcessBody),
    Source(ProcessBody),
    /// Post-fire form: only the output channel remains.
    Emitted(Ident),
}

impl Process {
    /// Build the process for a body, guarded by `mode` over `inputs` unless
    /// the input list is empty.
    pub fn with_inputs(mode: Mode, inputs: Vec<Ident>, body: ProcessBody) -> Process {
        if inputs.is_empty() {
            Process::Source(body)
        } else {
            Process::Guarded(Join { kind: mode, inputs }, body)
        }
    }

    pub fn out(&self) -> &Ident {
        match self {
            Process::Guarded(_, b) | Process::Source(b) => &b.out,
            Process::Emitted(l) => l,
        }
    }

    pub fn inputs(&self) -> &[Ident] {
        match self {
            Process::Guarded(j, _) => &j.inputs,
            _ => &[],
        }
    }

    pub fn body(&self) -> Option<&ProcessBody> {
        match self {
            Process::Guarded(_, b) | Process::Source(b) => Some(b),
            Process::Emitted(_) => None,
        }
    }

    pub fn kind_letter(&self) -> char {
        match self {
            Process::Guarded(j, _) => j.kind.letter(),
            Process::Source(_) => 'S',
            Process::Emitted(_) => 'E',
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(x) => f.write_str(x),
            Expr::Id(l) => write!(f, "{l}"),
            Expr::Signal(r, n) | Expr::Upstream(r, n) | Expr::Method(r, n) => write!(f, "{r}.{n}"),
            Expr::Object(o) => {
                write!(f, "{}[", o.label)?;
                let mut first = true;
                let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
                    if !std::mem::take(&mut first) {
                        f.write_str(", ")?;
                    }
                    Ok(())
                };
                for (p, e) in &o.signals {
                    sep(f)?;
                    write!(f, "{p} = {e}")?;
                }
                for (s, e) in &o.upstreams {
                    sep(f)?;
                    write!(f, "{s} = {e}")?;
                }
                for m in &o.methods {
                    sep(f)?;
                    write!(f, "{} = zeta({}) {}", m.name, m.self_var, m.body)?;
                }
                f.write_str("]")
            }
            Expr::SetUpstreams(r, args) => {
                write!(f, "{r}.setu(")?;
                write_list(f, args, ", ")?;
                f.write_str(")")
            }
            Expr::Apply(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args, ", ")?;
                f.write_str(")")
            }
            Expr::Seq(items) => write_list(f, items, "; "),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Expr], sep: &str) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(label: &str, signals: Vec<(&str, Expr)>, upstreams: Vec<(&str, Expr)>) -> Expr {
        Expr::Object(ObjectLit {
            label: Ident::new(label),
            signals: signals.into_iter().map(|(p, e)| (p.to_string(), e)).collect(),
            upstreams: upstreams.into_iter().map(|(s, e)| (s.to_string(), e)).collect(),
            methods: vec![],
        })
    }

    #[test]
    fn substitute_single_variable() {
        assert_eq!(substitute(&Expr::var("x"), "x", &Ident::new("l0")), Expr::id("l0"));
    }

    #[test]
    fn substitute_recurses_into_receiver() {
        let e = Expr::var("x").signal("p");
        assert_eq!(substitute(&e, "x", &"l0".into()), Expr::id("l0").signal("p"));
    }

    #[test]
    fn substitute_leaves_other_variables() {
        let e = Expr::var("y").method("m");
        assert_eq!(substitute(&e, "x", &"l0".into()), e);
    }

    #[test]
    fn substitute_respects_shadowing_self() {
        let inner = Expr::Object(ObjectLit {
            label: "l9".into(),
            signals: vec![("p".into(), Expr::var("x"))],
            upstreams: vec![],
            methods: vec![MethodDef::new("m", "x", Expr::var("x").signal("p"))],
        });
        let out = substitute(&inner, "x", &"l0".into());
        let Expr::Object(o) = out else { panic!() };
        assert_eq!(o.signals[0].1, Expr::id("l0"));
        assert_eq!(o.methods[0].body, Expr::var("x").signal("p"));
    }

    #[test]
    fn values_do_not_decompose() {
        assert!(decompose(&Expr::id("l"), &EvalMode::Explicit).is_none());
    }

    #[test]
    fn setu_reduces_object_argument_first() {
        let lit = obj("l6", vec![("d", Expr::id("ld'"))], vec![]);
        let e = Expr::id("l5").setu(vec![Expr::id("l3"), lit.clone()]);
        let (ctx, redex) = decompose(&e, &EvalMode::Explicit).unwrap();
        assert_eq!(redex, lit);
        assert_eq!(
            ctx.frames(),
            &[Frame::SetuArg {
                recv: "l5".into(),
                done: vec!["l3".into()],
                rest: vec![]
            }]
        );
        assert_eq!(plug(&ctx, Expr::id("l6")), Expr::id("l5").setu(vec![Expr::id("l3"), Expr::id("l6")]));
    }

    #[test]
    fn innermost_receiver_first() {
        let e = Expr::id("l0").upstream("s").signal("p");
        let (ctx, redex) = decompose(&e, &EvalMode::Propagation(BTreeSet::new())).unwrap();
        assert_eq!(ctx.frames(), &[Frame::Signal("p".into())]);
        assert_eq!(redex, Expr::id("l0").upstream("s"));
        assert_eq!(plug(&EvalContext(vec![Frame::Signal("p".into())]), Expr::id("l0")), Expr::id("l0").signal("p"));
    }

    #[test]
    fn plug_into_hole_is_identity() {
        let e = Expr::id("a").signal("p");
        assert_eq!(plug(&EvalContext::hole(), e.clone()), e);
    }

    #[test]
    fn object_literal_only_reduces_upstream_slots() {
        // signal right-hand sides stay unreduced at creation time
        let e = obj("l1", vec![("p", Expr::id("l2").signal("q"))], vec![]);
        let (ctx, redex) = decompose(&e, &EvalMode::Explicit).unwrap();
        assert!(ctx.is_hole());
        assert_eq!(redex, e);
    }

    #[test]
    fn propagation_mode_rejects_explicit_redexes() {
        let e = obj("l1", vec![], vec![]);
        assert!(decompose(&e, &EvalMode::Propagation(BTreeSet::new())).is_none());
        let e = Expr::id("l1").setu(vec![]);
        assert!(decompose(&e, &EvalMode::Propagation(BTreeSet::new())).is_none());
    }

    #[test]
    fn member_access_on_object_literal_is_stuck() {
        let e = obj("l1", vec![], vec![]).signal("p");
        assert!(decompose(&e, &EvalMode::Explicit).is_none());
    }

    #[test]
    fn settle_drops_leading_values() {
        let e = Expr::Seq(vec![Expr::id("a"), Expr::id("b").signal("p"), Expr::id("c").signal("q")]);
        assert_eq!(
            settle(e),
            Expr::Seq(vec![Expr::id("b").signal("p"), Expr::id("c").signal("q")])
        );
        assert_eq!(settle(Expr::Seq(vec![Expr::id("a"), Expr::id("b")])), Expr::id("b"));
    }

    #[test]
    fn intern_is_deterministic_and_bounded() {
        let a = intern_apply("f", &["x".into(), "y".into()]);
        assert_eq!(a.as_str(), "f(x;y)");
        let long: Vec<Ident> = (0..40).map(|i| Ident::new(format!("arg{i}"))).collect();
        let h1 = intern_apply("g", &long);
        let h2 = intern_apply("g", &long);
        assert_eq!(h1, h2);
        assert!(h1.as_str().starts_with("g#"));
        assert!(h1.as_str().len() <= INTERN_MAX);
    }

    #[test]
    fn display_matches_calculus_shape() {
        let e = Expr::id("l5").setu(vec![Expr::id("l3"), obj("l6", vec![("d", Expr::id("ld'"))], vec![])]);
        assert_eq!(e.to_string(), "l5.setu(l3, l6[d = ld'])");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            "[a-c]".prop_map(Expr::id),
            "[xy]".prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), "[pq]").prop_map(|(e, p)| e.signal(p)),
                (inner.clone(), "[st]").prop_map(|(e, s)| e.upstream(s)),
                (inner.clone(), "[m]").prop_map(|(e, m)| e.method(m)),
                (inner.clone(), proptest::collection::vec(inner.clone(), 0..3)).prop_map(|(r, a)| r.setu(a)),
                proptest::collection::vec(inner.clone(), 0..3).prop_map(|a| Expr::apply("f", a)),
                (proptest::collection::vec(inner.clone(), 0..2), proptest::collection::vec(inner.clone(), 0..2), "[xy]", inner.clone()).prop_map(
                    |(sig, up, x, body)| Expr::Object(ObjectLit {
                        label: "o".into(),
                        signals: sig.into_iter().enumerate().map(|(i, e)| (format!("p{i}"), e)).collect(),
                        upstreams: up.into_iter().enumerate().map(|(i, e)| (format!("s{i}"), e)).collect(),
                        methods: vec![MethodDef::new("m", x, body)],
                    })
                ),
                proptest::collection::vec(inner, 2..4).prop_map(Expr::Seq),
            ]
        })
    }

    proptest! {
        #[test]
        fn decompose_is_deterministic_and_plug_inverts_it(e in arb_expr(), propagation in any::<bool>()) {
            let mode = if propagation { EvalMode::Propagation(BTreeSet::new()) } else { EvalMode::Explicit };
            let a = decompose(&e, &mode);
            prop_assert_eq!(&a, &decompose(&e, &mode));
            if let Some((ctx, redex)) = a {
                prop_assert_eq!(plug(&ctx, redex.clone()), e);
                if propagation {
                    prop_assert!(ctx.is_pure());
                    prop_assert!(is_pure_redex(&redex));
                } else {
                    prop_assert!(is_explicit_redex(&redex));
                }
            }
        }

        #[test]
        fn substitution_removes_the_variable(e in arb_expr(), l in "[a-c]") {
            let out = substitute(&e, "x", &Ident::new(&l));
            prop_assert!(!out.free_vars().contains("x"));
            let mut expected = e.free_vars();
            expected.remove("x");
            prop_assert_eq!(out.free_vars(), expected);
        }
    }
}
