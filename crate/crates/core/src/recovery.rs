//! Checkpoint recovery: recompute every row an instance should hold since
//! its last checkpoint, in upstream-first order, and repair the store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{Ident, Mode, Process};
use crate::consistency::{equiv_mode, equiv_records_at, equiv_records_upto, equiv_tm, history_equiv_upto};
use crate::engine::{fire_values, schedule, step, Delivery, EngineError, MachineState};
use crate::env::{topological_order, EnvError, IdentEnv, SwitchHistory};
use crate::feed::{FeedSample, SourceFeed};
use crate::store::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("upstream `{upstream}` of `{id}` is not recovered through {to}")]
    UpstreamGap { id: Ident, upstream: Ident, to: u64 },
    #[error("no topology recorded for {0}")]
    TopologyGap(Timestamp),
    #[error("the recorded topologies form a cycle")]
    CyclicHistory,
    #[error("precondition does not hold: {0}")]
    Hypothesis(String),
}

impl From<EnvError> for RecoveryError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::NoSnapshot(t) => RecoveryError::TopologyGap(t),
            other => RecoveryError::Engine(EngineError::Env(other)),
        }
    }
}

/// Last checkpoint each instance has been recovered through.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckpointState {
    last: BTreeMap<Ident, Timestamp>,
}

impl CheckpointState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last(&self, id: &Ident) -> Timestamp {
        self.last.get(id).copied().unwrap_or(Timestamp::Bottom)
    }

    /// Move forward only; an older time is ignored.
    pub fn advance(&mut self, id: &Ident, t: u64) {
        let e = self.last.entry(id.clone()).or_insert(Timestamp::Bottom);
        if *e < Timestamp::At(t) {
            *e = Timestamp::At(t);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repair {
    pub id: Ident,
    pub t: u64,
    pub values: Vec<(String, Ident)>,
    /// Row that was overwritten, if one existed.
    pub previous: Option<Vec<Ident>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub checkpoint_t: u64,
    pub repaired: Vec<Repair>,
    pub blocked: Vec<Ident>,
    pub advanced: Vec<Ident>,
}

impl fmt::Display for RecoveryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.repaired {
            write!(f, "REPAIRED\t{}\t{}\t", r.id, r.t)?;
            for (i, (p, v)) in r.values.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}={v}")?;
            }
            writeln!(f)?;
        }
        for b in &self.blocked {
            writeln!(f, "BLOCKED\t{b}")?;
        }
        for a in &self.advanced {
            writeln!(f, "ADVANCED\t{a}\t{}", self.checkpoint_t)?;
        }
        Ok(())
    }
}

/// Whether `l`, bound to `p`, should hold a row at `t` given the rows its
/// upstreams hold.
fn expected_at(mu: &IdentEnv, p: &Process, l: &Ident, t: u64, feed: &dyn SourceFeed) -> bool {
    if !mu.tm(l).is_some_and(|tm| t % tm == 0) {
        return false;
    }
    let has = |i: &Ident| mu.relation(i).is_some_and(|r| r.has_record_at(Timestamp::At(t)));
    match p {
        Process::Source(_) => feed.sample(l, t) != FeedSample::Silent,
        Process::Guarded(j, _) => match j.kind {
            Mode::Union => j.inputs.iter().any(has),
            Mode::Intersection => j.inputs.iter().all(has),
        },
        Process::Emitted(_) => false,
    }
}

/// Full-delivery firing orders by time. They depend only on structure, so
/// one checkpoint computes each at most once.
type Schedules = BTreeMap<u64, Vec<Ident>>;

fn recalc_in_place(
    mu: &mut IdentEnv,
    phi: &SwitchHistory,
    l: &Ident,
    from: Timestamp,
    to: u64,
    feed: &dyn SourceFeed,
    schedules: &mut Schedules,
) -> Result<Vec<Repair>, RecoveryError> {
    let lo = match from {
        Timestamp::Bottom => 0,
        Timestamp::At(n) => n + 1,
    };
    let mut repairs = Vec::new();
    for t in lo..=to {
        let nu = phi.at(Timestamp::At(t))?;
        let Some(p) = nu.get(l) else { continue };
        if !expected_at(mu, p, l, t, feed) {
            continue;
        }
        let order = schedules
            .entry(t)
            .or_insert_with(|| schedule(nu, mu, t, &Delivery::Full, feed));
        let before: BTreeSet<Ident> = match order.iter().position(|x| x == l) {
            Some(i) => order[..i].iter().cloned().collect(),
            None => order
                .iter()
                .filter(|x| *x != l && mu.relation(x).is_some_and(|r| r.has_record_at(Timestamp::At(t))))
                .cloned()
                .collect(),
        };
        let row = fire_values(l, p, mu, nu, t, &before, None, feed)?;
        let rel = &mut mu.get_mut(l).ok_or_else(|| EngineError::UnknownId(l.clone()))?.relation;
        if rel.row_at(Timestamp::At(t)) == Some(row.as_slice()) {
            continue;
        }
        let values = rel.schema().iter().cloned().zip(row.iter().cloned()).collect();
        let previous = rel.insert(t, row).map_err(EngineError::from)?;
        repairs.push(Repair {
            id: l.clone(),
            t,
            values,
            previous,
        });
    }
    Ok(repairs)
}

/// Recompute the rows of `l` in `(from, to]`, overwriting rows that differ
/// and inserting missing ones. Upstreams must already be recovered.
pub fn recalc_instance(
    mu: &IdentEnv,
    phi: &SwitchHistory,
    l: &Ident,
    from: Timestamp,
    to: u64,
    feed: &dyn SourceFeed,
) -> Result<(IdentEnv, Vec<Repair>), RecoveryError> {
    let mut out = mu.clone();
    let repairs = recalc_in_place(&mut out, phi, l, from, to, feed, &mut Schedules::new())?;
    Ok((out, repairs))
}

/// Run one checkpoint at `checkpoint_t` over the store in place.
///
/// Instances are visited upstream first. A faulted instance and everything
/// downstream of it is blocked and keeps its last checkpoint.
pub fn checkpoint_in_place(
    mu: &mut IdentEnv,
    phi: &SwitchHistory,
    cp: &mut CheckpointState,
    checkpoint_t: u64,
    fault: &BTreeSet<Ident>,
    feed: &dyn SourceFeed,
) -> Result<RecoveryReport, RecoveryError> {
    let mut nodes = BTreeSet::new();
    let mut edges: BTreeMap<Ident, BTreeSet<Ident>> = BTreeMap::new();
    for (t, nu) in phi.iter() {
        if t > checkpoint_t {
            break;
        }
        for (id, p) in nu.iter() {
            nodes.insert(id.clone());
            edges.entry(id.clone()).or_default().extend(p.inputs().iter().cloned());
        }
    }
    let order = topological_order(&nodes, &edges).ok_or(RecoveryError::CyclicHistory)?;
    let mut report = RecoveryReport {
        checkpoint_t,
        ..Default::default()
    };
    let mut blocked = BTreeSet::new();
    let mut schedules = Schedules::new();
    for l in &order {
        let ups = &edges[l];
        if fault.contains(l) || ups.iter().any(|u| blocked.contains(u)) {
            blocked.insert(l.clone());
            continue;
        }
        if let Some(u) = ups
            .iter()
            .find(|u| nodes.contains(*u) && cp.last(u) < Timestamp::At(checkpoint_t))
        {
            return Err(RecoveryError::UpstreamGap {
                id: l.clone(),
                upstream: u.clone(),
                to: checkpoint_t,
            });
        }
        let from = cp.last(l);
        if from < Timestamp::At(checkpoint_t) {
            report
                .repaired
                .extend(recalc_in_place(mu, phi, l, from, checkpoint_t, feed, &mut schedules)?);
        }
        cp.advance(l, checkpoint_t);
        report.advanced.push(l.clone());
    }
    report.repaired.sort_by(|a, b| (&a.id, a.t).cmp(&(&b.id, b.t)));
    report.blocked = blocked.into_iter().collect();
    report.advanced.sort();
    Ok(report)
}

/// Functional form of [`checkpoint_in_place`] over a machine state.
pub fn run_checkpoint(
    s: &MachineState,
    cp: &CheckpointState,
    checkpoint_t: u64,
    fault: &BTreeSet<Ident>,
    feed: &dyn SourceFeed,
) -> Result<(IdentEnv, CheckpointState, RecoveryReport), RecoveryError> {
    let mut mu = s.mu.clone();
    let mut cp2 = cp.clone();
    let report = checkpoint_in_place(&mut mu, &s.phi, &mut cp2, checkpoint_t, fault, feed)?;
    Ok((mu, cp2, report))
}

/// Outcome of comparing a full step against re-execution of a lossy one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecomputationVerdict {
    pub t: u64,
    pub fired: Vec<Ident>,
    pub checks: Vec<(&'static str, bool)>,
}

impl RecomputationVerdict {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect()
    }
}

/// Step `s` once with full delivery and once delivering only `deliver`,
/// then re-execute the lossy result from the previous topology and compare
/// with the full step.
pub fn recomputation_oracle(
    s: &MachineState,
    deliver: &BTreeSet<Ident>,
    feed: &dyn SourceFeed,
) -> Result<RecomputationVerdict, RecoveryError> {
    let t = s.t;
    if t == 0 {
        return Err(RecoveryError::Hypothesis("needs a previous tick".into()));
    }
    if s.phi.at(Timestamp::At(t)).ok() != Some(&s.nu) {
        return Err(RecoveryError::Hypothesis("history does not end in the current network".into()));
    }
    if s
        .mu
        .iter()
        .any(|(_, e)| e.relation.rows().any(|(k, _)| k >= Timestamp::At(t)))
    {
        return Err(RecoveryError::Hypothesis("store holds rows from the future".into()));
    }
    let a = step(s, &Delivery::Full, feed)?;
    let b = step(s, &Delivery::Only(deliver.clone()), feed)?;
    let b_state = b.state_after;
    let replay = MachineState {
        mu: b_state.mu,
        nu: b_state.phi.at(Timestamp::At(t - 1))?.clone(),
        phi: b_state.phi,
        t,
        expr: s.expr.clone(),
    };
    let c = step(&replay, &Delivery::Full, feed)?;
    let (m1, m3) = (&a.state_after.mu, &c.state_after.mu);
    let fired: BTreeSet<Ident> = a.outcome.fired.iter().cloned().collect();
    let checks = vec![
        ("records-before", equiv_records_upto(m1, m3, Timestamp::At(t - 1)).unwrap_or(false)),
        ("records-at-fired", equiv_records_at(m1, m3, t, &fired).unwrap_or(false)),
        ("records-upto", equiv_records_upto(m1, m3, Timestamp::At(t)).unwrap_or(false)),
        ("timing", equiv_tm(m1, m3).unwrap_or(false)),
        ("mode", equiv_mode(m1, m3).unwrap_or(false)),
        ("fired", a.outcome.fired == c.outcome.fired),
        ("network", a.state_after.nu == c.state_after.nu),
        ("history", history_equiv_upto(&a.state_after.phi, &c.state_after.phi, t)),
        ("expression", a.state_after.expr == c.state_after.expr),
        ("time", a.state_after.t == c.state_after.t),
    ];
    Ok(RecomputationVerdict {
        t,
        fired: a.outcome.fired,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Expr;
    use crate::consistency::consistent_env;
    use crate::engine::{run, LossSchedule};
    use crate::feed::ConstantFeed;
    use crate::fixtures::{five_node_network, five_node_resolver, switch_literal};

    fn set(xs: &[&str]) -> BTreeSet<Ident> {
        xs.iter().map(|s| Ident::new(s)).collect()
    }

    fn five_node() -> MachineState {
        MachineState::new(five_node_resolver(), five_node_network(), Expr::id("done"))
    }

    fn lossy(ticks: u64) -> (MachineState, MachineState) {
        let losses: LossSchedule = [(1, set(&["l3"]))].into();
        let (base, _) = run(five_node(), ticks, &LossSchedule::new(), &ConstantFeed).unwrap();
        let (lost, _) = run(five_node(), ticks, &losses, &ConstantFeed).unwrap();
        (base, lost)
    }

    #[test]
    fn recalc_inserts_lost_union_row() {
        let (base, lost) = lossy(3);
        let (mu, repairs) = recalc_instance(&lost.mu, &lost.phi, &"l3".into(), Timestamp::Bottom, 2, &ConstantFeed).unwrap();
        assert_eq!(repairs.len(), 1);
        assert_eq!(repairs[0].t, 1);
        assert_eq!(repairs[0].previous, None);
        assert_eq!(mu.relation(&"l3".into()), base.mu.relation(&"l3".into()));
    }

    #[test]
    fn intersection_does_not_expect_rows_missing_an_input() {
        let mut mu = five_node_resolver();
        let put = |mu: &mut IdentEnv, id: &str, t| {
            mu.get_mut(&id.into()).unwrap().relation.insert(t, vec!["v".into()]).unwrap();
        };
        put(&mut mu, "l4", 1);
        put(&mut mu, "l4", 2);
        put(&mut mu, "l3", 1);
        let phi = SwitchHistory::with_initial(five_node_network());
        let (mu2, repairs) = recalc_instance(&mu, &phi, &"l5".into(), Timestamp::At(0), 2, &ConstantFeed).unwrap();
        assert_eq!(repairs.iter().map(|r| r.t).collect::<Vec<_>>(), vec![1]);
        assert!(!mu2.relation(&"l5".into()).unwrap().has_record_at(Timestamp::At(2)));
    }

    #[test]
    fn checkpoint_restores_the_baseline() {
        let (base, lost) = lossy(6);
        assert!(!consistent_env(&lost.mu, &lost.nu, 1).is_consistent());
        let (mu, cp, report) = run_checkpoint(&lost, &CheckpointState::new(), 5, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert!(equiv_records_upto(&mu, &base.mu, Timestamp::At(5)).unwrap());
        let repaired: Vec<(&str, u64)> = report.repaired.iter().map(|r| (r.id.as_str(), r.t)).collect();
        assert_eq!(repaired, [("l3", 1), ("l5", 1)]);
        for id in ["l1", "l2", "l3", "l4", "l5"] {
            assert_eq!(cp.last(&id.into()), Timestamp::At(5));
        }
        assert!(report.blocked.is_empty());
    }

    #[test]
    fn fault_blocks_downstream_and_keeps_checkpoints() {
        let (base, lost) = lossy(10);
        let (mu, cp, report) = run_checkpoint(&lost, &CheckpointState::new(), 5, &set(&["l3"]), &ConstantFeed).unwrap();
        assert_eq!(report.blocked, vec![Ident::new("l3"), Ident::new("l5")]);
        assert_eq!(cp.last(&"l3".into()), Timestamp::Bottom);
        assert_eq!(cp.last(&"l5".into()), Timestamp::Bottom);
        assert_eq!(cp.last(&"l4".into()), Timestamp::At(5));
        assert!(report.repaired.is_empty());
        // a later fault-free checkpoint catches up
        let s = MachineState { mu, ..lost };
        let (mu, cp, report) = run_checkpoint(&s, &cp, 9, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert_eq!(report.repaired.len(), 2);
        assert!(equiv_records_upto(&mu, &base.mu, Timestamp::At(9)).unwrap());
        assert_eq!(cp.last(&"l5".into()), Timestamp::At(9));
    }

    #[test]
    fn checkpoint_is_idempotent_without_losses() {
        let (base, _) = lossy(6);
        let (mu, cp, report) = run_checkpoint(&base, &CheckpointState::new(), 5, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert!(report.repaired.is_empty());
        assert_eq!(mu, base.mu);
        let s = MachineState { mu, ..base };
        let (mu2, _, again) = run_checkpoint(&s, &cp, 5, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert!(again.repaired.is_empty());
        assert_eq!(mu2, s.mu);
    }

    #[test]
    fn recovery_follows_switched_topology() {
        let mut s = MachineState::new(
            five_node_resolver(),
            five_node_network(),
            Expr::id("l5").setu(vec![Expr::id("l3"), switch_literal()]),
        );
        let (base, _) = run(s.clone(), 6, &LossSchedule::new(), &ConstantFeed).unwrap();
        let losses: LossSchedule = [(1, set(&["l5"])), (4, set(&["l6", "l3"]))].into();
        s = run(s, 6, &losses, &ConstantFeed).unwrap().0;
        assert!(!equiv_records_upto(&s.mu, &base.mu, Timestamp::At(5)).unwrap());
        let (mu, _, _) = run_checkpoint(&s, &CheckpointState::new(), 5, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert!(equiv_records_upto(&mu, &base.mu, Timestamp::At(5)).unwrap());
    }

    #[test]
    fn oracle_holds_on_fresh_tick_with_nothing_delivered() {
        let (s, _) = run(five_node(), 2, &LossSchedule::new(), &ConstantFeed).unwrap();
        let v = recomputation_oracle(&s, &BTreeSet::new(), &ConstantFeed).unwrap();
        assert!(v.holds(), "{:?}", v.failed());
        assert_eq!(v.fired.len(), 5);
    }

    #[test]
    fn oracle_rejects_tick_zero() {
        assert!(matches!(
            recomputation_oracle(&five_node(), &BTreeSet::new(), &ConstantFeed),
            Err(RecoveryError::Hypothesis(_))
        ));
    }

    #[test]
    fn report_lines() {
        let (_, lost) = lossy(3);
        let (_, _, report) = run_checkpoint(&lost, &CheckpointState::new(), 2, &set(&["l4"]), &ConstantFeed).unwrap();
        let text = report.to_string();
        assert!(text.starts_with("REPAIRED\tl3\t1\tc=m(la;lb)\n"));
        assert!(text.contains("BLOCKED\tl4\nBLOCKED\tl5\n"));
        assert!(text.ends_with("ADVANCED\tl3\t2\n"));
    }
}
