//! Explicit reduction: instance creation, upstream switching and lifted
//! pure steps.

use std::fmt;

use crate::calculus::{decompose, plug, settle, EvalMode, Expr, Ident, ObjectLit, Process, ProcessBody};
use crate::consistency::wellformed_instance;
use crate::env::{check_acyclic, IdentEnv, ProcEnv, SwitchHistory};

use super::pure::Reader;
use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Obj,
    Setu,
    Pure,
    Noop,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Obj => "R-OBJ",
            Rule::Setu => "R-SETU",
            Rule::Pure => "R-PURE",
            Rule::Noop => "NOOP",
        })
    }
}

/// Result of one explicit step before propagation.
#[derive(Clone, Debug)]
pub(crate) struct Reduced {
    pub nu: Option<ProcEnv>,
    pub expr: Expr,
    pub rule: Rule,
}

pub(crate) fn reduce(mu: &IdentEnv, t: u64, nu: &ProcEnv, e: &Expr) -> Result<Reduced, EngineError> {
    if e.is_value() {
        return Ok(Reduced {
            nu: None,
            expr: e.clone(),
            rule: Rule::Noop,
        });
    }
    let (ctx, redex) = decompose(e, &EvalMode::Explicit).ok_or_else(|| EngineError::Stuck(e.to_string()))?;
    let (nu2, result, rule) = match &redex {
        Expr::Object(o) => {
            let nu2 = create(mu, nu, o)?;
            (Some(nu2), Expr::Id(o.label.clone()), Rule::Obj)
        }
        Expr::SetUpstreams(r, args) => {
            let l = r.as_value().expect("decompose yields a value receiver");
            let args: Vec<Ident> = args.iter().map(|a| a.as_value().cloned().unwrap()).collect();
            let nu2 = switch(mu, nu, l, args)?;
            (Some(nu2), Expr::Id(l.clone()), Rule::Setu)
        }
        _ => {
            let reader = Reader {
                mu,
                nu,
                t,
                mode: &EvalMode::Explicit,
                staged: None,
                local: None,
            };
            (None, reader.reduce_redex(&redex)?, Rule::Pure)
        }
    };
    Ok(Reduced {
        nu: nu2,
        expr: settle(plug(&ctx, result)),
        rule,
    })
}

fn install(mu: &IdentEnv, nu: &ProcEnv, l: &Ident, p: Process) -> Result<ProcEnv, EngineError> {
    if let Some(i) = p.inputs().iter().find(|i| !nu.contains(i) && *i != l) {
        return Err(EngineError::Unbound(i.clone()));
    }
    for i in p.inputs() {
        if !mu.contains(i) {
            return Err(EngineError::UnknownId(i.clone()));
        }
    }
    let mut nu2 = nu.clone();
    nu2.bind(l.clone(), p);
    if !check_acyclic(&nu2) {
        return Err(EngineError::CyclicSwitch(l.clone()));
    }
    if !wellformed_instance(mu, &nu2, l).unwrap_or(false) {
        let inputs = nu2.inputs(l).to_vec();
        return Err(EngineError::IllTimedSwitch {
            id: l.clone(),
            declared: mu.tm(l).unwrap_or(0),
            inputs,
        });
    }
    Ok(nu2)
}

fn create(mu: &IdentEnv, nu: &ProcEnv, o: &ObjectLit) -> Result<ProcEnv, EngineError> {
    let entry = mu.get(&o.label).ok_or_else(|| EngineError::UnknownId(o.label.clone()))?;
    let names: Vec<&str> = o.signals.iter().map(|(p, _)| p.as_str()).collect();
    if names != entry.relation.schema().iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(EngineError::SchemaMismatch(o.label.clone()));
    }
    let inputs: Vec<Ident> = o.upstreams.iter().map(|(_, e)| e.as_value().cloned().unwrap()).collect();
    let body = ProcessBody {
        out: o.label.clone(),
        slots: o.upstreams.iter().map(|(s, _)| s.clone()).collect(),
        effects: o.signals.clone(),
        methods: o.methods.clone(),
    };
    install(mu, nu, &o.label, Process::with_inputs(entry.mode, inputs, body))
}

fn switch(mu: &IdentEnv, nu: &ProcEnv, l: &Ident, args: Vec<Ident>) -> Result<ProcEnv, EngineError> {
    let p = nu.get(l).ok_or_else(|| EngineError::Unbound(l.clone()))?;
    let body = p.body().ok_or_else(|| EngineError::Unbound(l.clone()))?.clone();
    if body.slots.len() != args.len() {
        return Err(EngineError::ArityMismatch {
            id: l.clone(),
            expected: body.slots.len(),
            found: args.len(),
        });
    }
    let mode = mu.mode(l).ok_or_else(|| EngineError::UnknownId(l.clone()))?;
    install(mu, nu, l, Process::with_inputs(mode, args, body))
}

/// Result of [`explicit_step`].
#[derive(Clone, Debug)]
pub struct ExplicitStep {
    pub nu: ProcEnv,
    pub phi: SwitchHistory,
    pub expr: Expr,
    pub rule: Rule,
}

/// One explicit step `μ, t ⊢ ν; φ | e → ν'; φ' | e'`. A changed network is
/// recorded in the history at `t`.
pub fn explicit_step(mu: &IdentEnv, t: u64, nu: &ProcEnv, phi: &SwitchHistory, e: &Expr) -> Result<ExplicitStep, EngineError> {
    let r = reduce(mu, t, nu, e)?;
    let mut phi2 = phi.clone();
    let nu2 = match r.nu {
        Some(n) => {
            phi2.record(t, n.clone());
            n
        }
        None => nu.clone(),
    };
    Ok(ExplicitStep {
        nu: nu2,
        phi: phi2,
        expr: r.expr,
        rule: r.rule,
    })
}
