//! Well-formedness, consistency and the equivalences used by the
//! correctness properties.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use thiserror::Error;

use crate::calculus::{Ident, Mode, Process};
use crate::env::{IdentEnv, ProcEnv, SwitchHistory};
use crate::store::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("unknown id `{0}`")]
    UnknownId(Ident),
    #[error("resolver domains differ")]
    DomainMismatch,
}

/// Timing an instance must have given the timings of its inputs: the gcd
/// for a union join, the lcm for an intersection. `None` without inputs.
pub fn expected_tm(mode: Mode, input_tms: &[u64]) -> Option<u64> {
    let (first, rest) = input_tms.split_first()?;
    Some(rest.iter().fold(*first, |acc, tm| match mode {
        Mode::Union => acc.gcd(tm),
        Mode::Intersection => acc.lcm(tm),
    }))
}

pub fn input_channels<'a>(nu: &'a ProcEnv, l: &Ident) -> Result<&'a [Ident], ConsistencyError> {
    nu.get(l)
        .map(Process::inputs)
        .ok_or_else(|| ConsistencyError::UnknownId(l.clone()))
}

/// The timing judgment for one instance. Sources are trivially well formed.
pub fn wellformed_instance(mu: &IdentEnv, nu: &ProcEnv, l: &Ident) -> Result<bool, ConsistencyError> {
    let p = nu.get(l).ok_or_else(|| ConsistencyError::UnknownId(l.clone()))?;
    let Process::Guarded(join, _) = p else {
        return Ok(true);
    };
    let tm = mu.tm(l).ok_or_else(|| ConsistencyError::UnknownId(l.clone()))?;
    let mut tms = Vec::with_capacity(join.inputs.len());
    for i in &join.inputs {
        tms.push(mu.tm(i).ok_or_else(|| ConsistencyError::UnknownId(i.clone()))?);
    }
    Ok(expected_tm(join.kind, &tms) == Some(tm))
}

pub fn wellformed_env(mu: &IdentEnv, nu: &ProcEnv) -> bool {
    nu.ids().all(|l| wellformed_instance(mu, nu, l).unwrap_or(false))
}

/// Record presence of `l` at `t` agrees with its join over its inputs.
pub fn consistent_at(mu: &IdentEnv, nu: &ProcEnv, t: u64, l: &Ident) -> Result<bool, ConsistencyError> {
    let Some(Process::Guarded(join, _)) = nu.get(l) else {
        return Ok(true);
    };
    let at = Timestamp::At(t);
    let has = |id: &Ident| {
        mu.relation(id)
            .map(|r| r.has_record_at(at))
            .ok_or_else(|| ConsistencyError::UnknownId(id.clone()))
    };
    let own = has(l)?;
    let mut any = false;
    let mut all = true;
    for i in &join.inputs {
        let h = has(i)?;
        any |= h;
        all &= h;
    }
    Ok(match join.kind {
        Mode::Union => own == any,
        Mode::Intersection => own == all,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub t: u64,
    pub id: Ident,
    pub mode: Mode,
    pub has_record: bool,
    pub inputs_with_record: Vec<Ident>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VIOLATION\t{}\t{}\t{}", self.t, self.id, self.mode)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: ConsistencyReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "OK");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every instance bound in `nu` at `t`. Instances whose inputs are
/// unknown to `mu` are reported as violations.
pub fn consistent_env(mu: &IdentEnv, nu: &ProcEnv, t: u64) -> ConsistencyReport {
    let mut report = ConsistencyReport::default();
    for (l, p) in nu.iter() {
        let Process::Guarded(join, _) = p else {
            continue;
        };
        report.checked += 1;
        if consistent_at(mu, nu, t, l).unwrap_or(false) {
            continue;
        }
        let at = Timestamp::At(t);
        report.violations.push(Violation {
            t,
            id: l.clone(),
            mode: join.kind,
            has_record: mu.relation(l).is_some_and(|r| r.has_record_at(at)),
            inputs_with_record: join
                .inputs
                .iter()
                .filter(|i| mu.relation(i).is_some_and(|r| r.has_record_at(at)))
                .cloned()
                .collect(),
        });
    }
    report
}

/// Every record at `t` sits on a tick the instance is allowed to use.
pub fn timing_hypothesis_holds(mu: &IdentEnv, t: u64) -> bool {
    mu.iter()
        .all(|(_, e)| !e.relation.has_record_at(Timestamp::At(t)) || t % e.tm == 0)
}

fn same_domain(a: &IdentEnv, b: &IdentEnv) -> Result<(), ConsistencyError> {
    if a.ids().eq(b.ids()) {
        Ok(())
    } else {
        Err(ConsistencyError::DomainMismatch)
    }
}

/// Relations agree on every row at or before `t`.
pub fn equiv_records_upto(a: &IdentEnv, b: &IdentEnv, t: Timestamp) -> Result<bool, ConsistencyError> {
    same_domain(a, b)?;
    Ok(a.iter().zip(b.iter()).all(|((_, x), (_, y))| {
        x.relation.schema() == y.relation.schema() && x.relation.rows_upto(t).eq(y.relation.rows_upto(t))
    }))
}

/// Rows at exactly `t` agree for the given ids.
pub fn equiv_records_at(a: &IdentEnv, b: &IdentEnv, t: u64, ids: &BTreeSet<Ident>) -> Result<bool, ConsistencyError> {
    let at = Timestamp::At(t);
    for id in ids {
        let (Some(x), Some(y)) = (a.relation(id), b.relation(id)) else {
            return Err(ConsistencyError::UnknownId(id.clone()));
        };
        if x.row_at(at) != y.row_at(at) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn equiv_tm(a: &IdentEnv, b: &IdentEnv) -> Result<bool, ConsistencyError> {
    same_domain(a, b)?;
    Ok(a.iter().zip(b.iter()).all(|((_, x), (_, y))| x.tm == y.tm))
}

pub fn equiv_mode(a: &IdentEnv, b: &IdentEnv) -> Result<bool, ConsistencyError> {
    same_domain(a, b)?;
    Ok(a.iter().zip(b.iter()).all(|((_, x), (_, y))| x.mode == y.mode))
}

pub fn restrict(mu: &IdentEnv, ids: &BTreeSet<Ident>) -> IdentEnv {
    mu.restrict(ids)
}

/// Histories agree at every tick up to and including `t`.
pub fn history_equiv_upto(a: &SwitchHistory, b: &SwitchHistory, t: u64) -> bool {
    let mut ticks: BTreeSet<u64> = a.times().chain(b.times()).filter(|x| *x <= t).collect();
    ticks.insert(0);
    ticks
        .into_iter()
        .all(|x| a.at(Timestamp::At(x)).ok() == b.at(Timestamp::At(x)).ok())
}
