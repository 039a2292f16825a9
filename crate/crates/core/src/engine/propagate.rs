//! Propagation: fire every instance whose guard is satisfied, one at a time.
//!
//! The schedule is canonical: at each point the smallest fireable id fires.
//! Whether an instance can fire depends only on the network, timings, the
//! delivery set and the feed, never on signal values, so the schedule can
//! be computed up front and replayed by recovery.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::{EvalMode, Ident, Mode, Process, ProcessBody};
use crate::env::{IdentEnv, ProcEnv};
use crate::feed::{FeedSample, SourceFeed};

use super::pure::Reader;
use super::EngineError;

/// Which eligible instances receive their inputs this tick.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Delivery {
    #[default]
    Full,
    Only(BTreeSet<Ident>),
    Except(BTreeSet<Ident>),
}

impl Delivery {
    pub fn admits(&self, l: &Ident) -> bool {
        match self {
            Delivery::Full => true,
            Delivery::Only(s) => s.contains(l),
            Delivery::Except(s) => !s.contains(l),
        }
    }
}

/// Instances bound in `nu` whose timing allows a record at `t`.
pub fn eligible(nu: &ProcEnv, mu: &IdentEnv, t: u64) -> BTreeSet<Ident> {
    nu.ids()
        .filter(|l| mu.tm(l).is_some_and(|tm| t % tm == 0))
        .cloned()
        .collect()
}

fn can_fire(
    p: &Process,
    id: &Ident,
    mu: &IdentEnv,
    t: u64,
    emitted: &BTreeSet<Ident>,
    delivery: &Delivery,
    feed: &dyn SourceFeed,
) -> bool {
    if !delivery.admits(id) || !mu.tm(id).is_some_and(|tm| t % tm == 0) {
        return false;
    }
    match p {
        Process::Emitted(_) => false,
        Process::Source(_) => feed.sample(id, t) != FeedSample::Silent,
        Process::Guarded(join, _) => match join.kind {
            Mode::Union => join.inputs.iter().any(|i| emitted.contains(i)),
            Mode::Intersection => join.inputs.iter().all(|i| emitted.contains(i)),
        },
    }
}

/// Firing order at `t` under `delivery`.
///
/// Fireability only grows as channels are emitted, so the instances that
/// can fire form a ready set that changes only around the one that just
/// fired. Popping its smallest member is the canonical order.
pub fn schedule(nu: &ProcEnv, mu: &IdentEnv, t: u64, delivery: &Delivery, feed: &dyn SourceFeed) -> Vec<Ident> {
    let mut consumers: BTreeMap<&Ident, Vec<(&Ident, &Process)>> = BTreeMap::new();
    for (id, p) in nu.iter() {
        for i in p.inputs() {
            consumers.entry(i).or_default().push((id, p));
        }
    }
    let mut emitted = BTreeSet::new();
    let mut ready: BTreeSet<&Ident> = nu
        .iter()
        .filter(|(id, p)| can_fire(p, id, mu, t, &emitted, delivery, feed))
        .map(|(id, _)| id)
        .collect();
    let mut order = Vec::new();
    while let Some(id) = ready.pop_first() {
        emitted.insert(id.clone());
        order.push(id.clone());
        for (c, p) in consumers.get(id).into_iter().flatten() {
            if !emitted.contains(*c) && !ready.contains(c) && can_fire(p, c, mu, t, &emitted, delivery, feed) {
                ready.insert(c);
            }
        }
    }
    order
}

/// Compute the row an instance writes when it fires at `t`, with
/// `fired_before` holding the instances that fired earlier in the same tick.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fire_values(
    id: &Ident,
    p: &Process,
    mu: &IdentEnv,
    nu: &ProcEnv,
    t: u64,
    fired_before: &BTreeSet<Ident>,
    staged: Option<&BTreeMap<Ident, Vec<Ident>>>,
    feed: &dyn SourceFeed,
) -> Result<Vec<Ident>, EngineError> {
    let body: &ProcessBody = p.body().ok_or_else(|| EngineError::Unbound(id.clone()))?;
    let overrides = match p {
        Process::Source(_) => match feed.sample(id, t) {
            FeedSample::Values(v) => v
                .into_iter()
                .filter_map(|(c, v)| Some((c.or_else(|| body.effects.first().map(|e| e.0.clone()))?, v)))
                .collect(),
            _ => Vec::new(),
        },
        _ => Vec::new(),
    };
    let mode = EvalMode::Propagation(fired_before.clone());
    let mut local: Vec<(String, Ident)> = Vec::with_capacity(body.effects.len());
    for (col, expr) in &body.effects {
        let v = match overrides.iter().rev().find(|(c, _)| c == col) {
            Some((_, v)) => v.clone(),
            None => {
                let reader = Reader {
                    mu,
                    nu,
                    t,
                    mode: &mode,
                    staged,
                    local: Some((id, &local)),
                };
                reader.eval(expr).map_err(|e| EngineError::Effect {
                    id: id.clone(),
                    column: col.clone(),
                    source: Box::new(e),
                })?
            }
        };
        local.push((col.clone(), v));
    }
    Ok(local.into_iter().map(|(_, v)| v).collect())
}

/// Rows produced by one propagation, not yet written to the store.
#[derive(Clone, Debug, Default)]
pub(crate) struct Staged {
    pub order: Vec<Ident>,
    pub rows: BTreeMap<Ident, Vec<Ident>>,
    pub eligible: BTreeSet<Ident>,
}

impl Staged {
    pub fn complete(&self) -> bool {
        self.order.len() == self.eligible.len() && self.order.iter().all(|l| self.eligible.contains(l))
    }

    pub fn commit(&self, mu: &mut IdentEnv, t: u64) -> Result<(), EngineError> {
        for (id, row) in &self.rows {
            let e = mu.get_mut(id).ok_or_else(|| EngineError::UnknownId(id.clone()))?;
            e.relation.insert(t, row.clone())?;
        }
        Ok(())
    }
}

pub(crate) fn stage(
    nu: &ProcEnv,
    t: u64,
    mu: &IdentEnv,
    delivery: &Delivery,
    feed: &dyn SourceFeed,
) -> Result<Staged, EngineError> {
    let order = schedule(nu, mu, t, delivery, feed);
    let mut fired = BTreeSet::new();
    let mut rows = BTreeMap::new();
    for id in &order {
        let p = nu.get(id).expect("scheduled ids are bound");
        let row = fire_values(id, p, mu, nu, t, &fired, Some(&rows), feed)?;
        let arity = mu.relation(id).map(|r| r.schema().len()).unwrap_or(0);
        if row.len() != arity {
            return Err(EngineError::SchemaMismatch(id.clone()));
        }
        rows.insert(id.clone(), row);
        fired.insert(id.clone());
    }
    Ok(Staged {
        order,
        rows,
        eligible: eligible(nu, mu, t),
    })
}

#[derive(Clone, Debug)]
pub struct PropagationOutcome {
    pub mu_after: IdentEnv,
    pub fired: Vec<Ident>,
    /// Every eligible instance fired.
    pub complete: bool,
}

/// Full propagation `ν; t ⊢ μ →l̄ μ'` under `delivery`.
pub fn propagate(
    nu: &ProcEnv,
    t: u64,
    mu: &IdentEnv,
    delivery: &Delivery,
    feed: &dyn SourceFeed,
) -> Result<PropagationOutcome, EngineError> {
    let staged = stage(nu, t, mu, delivery, feed)?;
    let mut mu_after = mu.clone();
    staged.commit(&mut mu_after, t)?;
    Ok(PropagationOutcome {
        complete: staged.complete(),
        fired: staged.order,
        mu_after,
    })
}

/// One firing inside a propagation. `inflight` holds the network with
/// already-fired instances replaced by their emitted channel. Returns
/// `None` when nothing can fire.
#[allow(clippy::too_many_arguments)]
pub fn process_step(
    nu: &ProcEnv,
    t: u64,
    mu: &IdentEnv,
    inflight: &ProcEnv,
    fired: &[Ident],
    delivery: &Delivery,
    feed: &dyn SourceFeed,
) -> Result<Option<(IdentEnv, ProcEnv, Vec<Ident>)>, EngineError> {
    let emitted: BTreeSet<Ident> = inflight
        .iter()
        .filter(|(_, p)| matches!(p, Process::Emitted(_)))
        .map(|(id, _)| id.clone())
        .collect();
    let Some((id, p)) = inflight
        .iter()
        .find(|(id, p)| can_fire(p, id, mu, t, &emitted, delivery, feed))
    else {
        return Ok(None);
    };
    let before: BTreeSet<Ident> = fired.iter().cloned().collect();
    let row = fire_values(id, p, mu, nu, t, &before, None, feed)?;
    let mut mu2 = mu.clone();
    mu2.get_mut(id)
        .ok_or_else(|| EngineError::UnknownId(id.clone()))?
        .relation
        .insert(t, row)?;
    let mut inflight2 = inflight.clone();
    inflight2.bind(id.clone(), Process::Emitted(id.clone()));
    let mut fired2 = fired.to_vec();
    fired2.push(id.clone());
    Ok(Some((mu2, inflight2, fired2)))
}
