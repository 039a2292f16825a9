//! The reduction machine: one explicit step followed by a propagation per tick.

mod explicit;
mod propagate;
mod pure;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{Expr, Ident};
use crate::env::{EnvError, IdentEnv, ProcEnv, SwitchHistory};
use crate::feed::SourceFeed;
use crate::store::StoreError;

pub use explicit::{explicit_step, ExplicitStep, Rule};
pub use propagate::{eligible, process_step, propagate, schedule, Delivery, PropagationOutcome};
pub use pure::{pure_step, FUEL};

pub(crate) use propagate::fire_values;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("stuck at `{0}`")]
    Stuck(String),
    #[error("unknown id `{0}`")]
    UnknownId(Ident),
    #[error("`{0}` is not bound in the network")]
    Unbound(Ident),
    #[error("switching `{0}` would create a cycle")]
    CyclicSwitch(Ident),
    #[error("timing {declared} of `{id}` does not match inputs {inputs:?}")]
    IllTimedSwitch {
        id: Ident,
        declared: u64,
        inputs: Vec<Ident>,
    },
    #[error("`{id}` has {expected} upstream slots, got {found} arguments")]
    ArityMismatch { id: Ident, expected: usize, found: usize },
    #[error("signals of `{0}` do not match its relation schema")]
    SchemaMismatch(Ident),
    #[error("no value within the step budget: `{0}`")]
    OutOfFuel(String),
    #[error("effect `{column}` of `{id}`: {source}")]
    Effect {
        id: Ident,
        column: String,
        source: Box<EngineError>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Machine configuration `μ; ν; φ; t | e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub mu: IdentEnv,
    pub nu: ProcEnv,
    pub phi: SwitchHistory,
    pub t: u64,
    pub expr: Expr,
}

impl MachineState {
    /// Start at tick zero with `nu` recorded as the initial snapshot.
    pub fn new(mu: IdentEnv, nu: ProcEnv, expr: Expr) -> Self {
        MachineState {
            mu,
            phi: SwitchHistory::with_initial(nu.clone()),
            nu,
            t: 0,
            expr,
        }
    }
}

/// What one tick did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TickSummary {
    pub t: u64,
    pub rule: Rule,
    pub expr_after: Expr,
    /// Fired instances in firing order, with their rows.
    pub fired: Vec<(Ident, Vec<(String, Ident)>)>,
    /// Eligible instances that did not receive their inputs.
    pub lost: Vec<Ident>,
    pub eligible: BTreeSet<Ident>,
    pub complete: bool,
}

impl TickSummary {
    pub fn fired_ids(&self) -> BTreeSet<Ident> {
        self.fired.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        let mut out = vec![TraceRecord::Rule {
            t: self.t,
            rule: self.rule,
            expr: self.expr_after.to_string(),
        }];
        out.extend(self.fired.iter().map(|(id, row)| TraceRecord::Fire {
            t: self.t,
            id: id.clone(),
            row: row.clone(),
        }));
        out.extend(self.lost.iter().map(|id| TraceRecord::Lost {
            t: self.t,
            id: id.clone(),
        }));
        out
    }
}

/// Advance `s` by one tick. On error `s` is left untouched.
pub fn step_in_place(s: &mut MachineState, delivery: &Delivery, feed: &dyn SourceFeed) -> Result<TickSummary, EngineError> {
    let t = s.t;
    let reduced = explicit::reduce(&s.mu, t, &s.nu, &s.expr)?;
    let net = reduced.nu.as_ref().unwrap_or(&s.nu);
    let staged = propagate::stage(net, t, &s.mu, delivery, feed)?;
    staged.commit(&mut s.mu, t)?;
    let complete = staged.complete();
    let fired = staged
        .order
        .iter()
        .map(|id| {
            let schema = s.mu.relation(id).map(|r| r.schema().to_vec()).unwrap_or_default();
            (id.clone(), schema.into_iter().zip(staged.rows[id].iter().cloned()).collect())
        })
        .collect();
    let fired_set: BTreeSet<&Ident> = staged.order.iter().collect();
    let lost = staged
        .eligible
        .iter()
        .filter(|l| !fired_set.contains(l) && !delivery.admits(l))
        .cloned()
        .collect();
    if let Some(nu2) = reduced.nu {
        s.phi.record(t, nu2.clone());
        s.nu = nu2;
    }
    s.expr = reduced.expr;
    s.t = t + 1;
    Ok(TickSummary {
        t,
        rule: reduced.rule,
        expr_after: s.expr.clone(),
        fired,
        lost,
        eligible: staged.eligible,
        complete,
    })
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub state_after: MachineState,
    pub outcome: PropagationOutcome,
    pub explicit_rule: Rule,
    pub summary: TickSummary,
}

/// Functional form of [`step_in_place`].
pub fn step(s: &MachineState, delivery: &Delivery, feed: &dyn SourceFeed) -> Result<StepReport, EngineError> {
    let mut next = s.clone();
    let summary = step_in_place(&mut next, delivery, feed)?;
    Ok(StepReport {
        outcome: PropagationOutcome {
            mu_after: next.mu.clone(),
            fired: summary.fired.iter().map(|(l, _)| l.clone()).collect(),
            complete: summary.complete,
        },
        explicit_rule: summary.rule,
        state_after: next,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceRecord {
    Rule { t: u64, rule: Rule, expr: String },
    Fire { t: u64, id: Ident, row: Vec<(String, Ident)> },
    Lost { t: u64, id: Ident },
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRecord::Rule { t, rule, expr } => write!(f, "{t}\tRULE\t{rule}\t{expr}"),
            TraceRecord::Fire { t, id, row } => {
                write!(f, "{t}\tFIRE\t{id}\t")?;
                for (i, (p, v)) in row.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}={v}")?;
                }
                Ok(())
            }
            TraceRecord::Lost { t, id } => write!(f, "{t}\tLOST\t{id}"),
        }
    }
}

/// Loss schedule: instances that miss their inputs at a given tick.
pub type LossSchedule = BTreeMap<u64, BTreeSet<Ident>>;

/// Run `ticks` steps from `s0`, dropping deliveries per `losses`.
pub fn run(
    s0: MachineState,
    ticks: u64,
    losses: &LossSchedule,
    feed: &dyn SourceFeed,
) -> Result<(MachineState, Vec<TraceRecord>), EngineError> {
    let mut s = s0;
    let mut trace = Vec::new();
    for _ in 0..ticks {
        let delivery = match losses.get(&s.t) {
            Some(l) => Delivery::Except(l.clone()),
            None => Delivery::Full,
        };
        trace.extend(step_in_place(&mut s, &delivery, feed)?.trace());
    }
    Ok((s, trace))
}

pub fn render_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}
