//! Pure reduction: signal reads, upstream reads, method invocation and
//! combinator application.

use std::collections::BTreeMap;

use crate::calculus::{decompose, intern_apply, is_pure_redex, plug, substitute, EvalMode, Expr, Ident, Process};
use crate::env::{IdentEnv, ProcEnv};
use crate::store::Timestamp;

use super::EngineError;

/// Upper bound on pure steps for one expression; method recursion is
/// otherwise unbounded.
pub const FUEL: usize = 10_000;

/// Everything a pure step may consult.
pub(crate) struct Reader<'a> {
    pub mu: &'a IdentEnv,
    pub nu: &'a ProcEnv,
    pub t: u64,
    pub mode: &'a EvalMode,
    /// Rows at `t` written earlier in the current propagation, not yet committed.
    pub staged: Option<&'a BTreeMap<Ident, Vec<Ident>>>,
    /// Columns of the firing instance computed so far in this firing.
    pub local: Option<(&'a Ident, &'a [(String, Ident)])>,
}

impl Reader<'_> {
    fn read_signal(&self, l0: &Ident, p: &str) -> Result<Ident, EngineError> {
        if let Some((me, cols)) = self.local {
            if me == l0 {
                if let Some((_, v)) = cols.iter().find(|(c, _)| c == p) {
                    return Ok(v.clone());
                }
            }
        }
        let entry = self.mu.get(l0).ok_or_else(|| EngineError::UnknownId(l0.clone()))?;
        let rel = &entry.relation;
        let at = match self.mode {
            EvalMode::Explicit => Timestamp::before(self.t),
            EvalMode::Propagation(fired) if fired.contains(l0) => {
                if let Some(row) = self.staged.and_then(|s| s.get(l0)) {
                    return Ok(row[rel.column(p)?].clone());
                }
                Timestamp::At(self.t)
            }
            EvalMode::Propagation(_) => Timestamp::before(self.t),
        };
        Ok(rel.latest_at(p, at)?.clone())
    }

    /// Apply one pure rule to an immediate redex.
    pub fn reduce_redex(&self, redex: &Expr) -> Result<Expr, EngineError> {
        let stuck = || EngineError::Stuck(redex.to_string());
        match redex {
            Expr::Signal(r, p) => {
                let l0 = r.as_value().ok_or_else(stuck)?;
                Ok(Expr::Id(self.read_signal(l0, p)?))
            }
            Expr::Upstream(r, s) => {
                let l0 = r.as_value().ok_or_else(stuck)?;
                match self.nu.get(l0) {
                    Some(Process::Guarded(join, body)) => {
                        let i = body.slot_index(s).ok_or_else(stuck)?;
                        join.inputs.get(i).cloned().map(Expr::Id).ok_or_else(stuck)
                    }
                    Some(_) => Err(stuck()),
                    None => Err(EngineError::Unbound(l0.clone())),
                }
            }
            Expr::Method(r, m) => {
                let l0 = r.as_value().ok_or_else(stuck)?;
                let p = self.nu.get(l0).ok_or_else(|| EngineError::Unbound(l0.clone()))?;
                let def = p.body().and_then(|b| b.method(m)).ok_or_else(stuck)?;
                Ok(substitute(&def.body, &def.self_var, l0))
            }
            Expr::Apply(f, args) => {
                let vals: Option<Vec<Ident>> = args.iter().map(|a| a.as_value().cloned()).collect();
                Ok(Expr::Id(intern_apply(f, &vals.ok_or_else(stuck)?)))
            }
            _ => Err(stuck()),
        }
    }

    /// One pure step in a pure context.
    pub fn step(&self, e: &Expr) -> Result<Expr, EngineError> {
        let (ctx, redex) = decompose(e, &EvalMode::Propagation(Default::default()))
            .ok_or_else(|| EngineError::Stuck(e.to_string()))?;
        debug_assert!(is_pure_redex(&redex));
        Ok(plug(&ctx, self.reduce_redex(&redex)?))
    }

    /// Reduce to a value.
    pub fn eval(&self, e: &Expr) -> Result<Ident, EngineError> {
        let mut cur = e.clone();
        for _ in 0..FUEL {
            if let Expr::Id(l) = cur {
                return Ok(l);
            }
            cur = self.step(&cur)?;
        }
        Err(EngineError::OutOfFuel(e.to_string()))
    }
}

/// One pure step `μ, ν, t ⊢ e →mode e'`.
pub fn pure_step(mu: &IdentEnv, nu: &ProcEnv, t: u64, mode: &EvalMode, e: &Expr) -> Result<Expr, EngineError> {
    let reader = Reader {
        mu,
        nu,
        t,
        mode,
        staged: None,
        local: None,
    };
    let (ctx, redex) = decompose(e, &EvalMode::Propagation(Default::default()))
        .ok_or_else(|| EngineError::Stuck(e.to_string()))?;
    Ok(plug(&ctx, reader.reduce_redex(&redex)?))
}
