//! Environments: the identifier resolver μ, the process network ν and the
//! switch history φ.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::calculus::{Ident, Mode, Process};
use crate::store::{dump_row, Relation, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("no switch snapshot at or before {0}")]
    NoSnapshot(Timestamp),
    #[error("`{0}` is not bound")]
    Unbound(Ident),
    #[error("timing must be at least one tick (got {tm} for `{id}`)")]
    ZeroTiming { id: Ident, tm: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolverEntry {
    pub relation: Relation,
    pub tm: u64,
    pub mode: Mode,
}

/// μ: identifier to (relation, timing, join mode). Its domain is fixed
/// once the program is lowered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdentEnv {
    entries: BTreeMap<Ident, ResolverEntry>,
}

impl IdentEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: Ident, entry: ResolverEntry) -> Result<(), EnvError> {
        if entry.tm == 0 {
            return Err(EnvError::ZeroTiming { id, tm: 0 });
        }
        self.entries.insert(id, entry);
        Ok(())
    }

    pub fn get(&self, id: &Ident) -> Option<&ResolverEntry> {
        self.entries.get(id)
    }

    pub fn get_mut(&mut self, id: &Ident) -> Option<&mut ResolverEntry> {
        self.entries.get_mut(id)
    }

    pub fn contains(&self, id: &Ident) -> bool {
        self.entries.contains_key(id)
    }

    pub fn tm(&self, id: &Ident) -> Option<u64> {
        self.entries.get(id).map(|e| e.tm)
    }

    pub fn mode(&self, id: &Ident) -> Option<Mode> {
        self.entries.get(id).map(|e| e.mode)
    }

    pub fn relation(&self, id: &Ident) -> Option<&Relation> {
        self.entries.get(id).map(|e| &e.relation)
    }

    pub fn ids(&self) -> impl Iterator<Item = &Ident> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, &ResolverEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total row count over all relations, `⊥` rows excluded.
    pub fn row_count(&self) -> usize {
        self.entries.values().map(|e| e.relation.len() - 1).sum()
    }

    /// Keep only the entries whose id is in `ids`.
    pub fn restrict(&self, ids: &BTreeSet<Ident>) -> IdentEnv {
        IdentEnv {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| ids.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// `<id>\t<time|BOT>\t<p>=<v>...`, sorted by id then time.
    pub fn dump_store(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            for (t, row) in e.relation.rows() {
                dump_row(&mut out, id, e.relation.schema(), t, row);
            }
        }
        out
    }
}

/// ν: the process network, one process per instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProcEnv {
    bindings: BTreeMap<Ident, Arc<Process>>,
}

impl ProcEnv {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bind without checking that inputs are bound.
    pub fn bind(&mut self, id: Ident, p: Process) {
        self.bindings.insert(id, Arc::new(p));
    }

    /// Bind, rejecting inputs that are neither bound nor `id` itself.
    pub fn bind_checked(&mut self, id: Ident, p: Process) -> Result<(), EnvError> {
        if let Some(missing) = p.inputs().iter().find(|i| **i != id && !self.bindings.contains_key(*i)) {
            return Err(EnvError::Unbound(missing.clone()));
        }
        self.bind(id, p);
        Ok(())
    }

    pub fn get(&self, id: &Ident) -> Option<&Process> {
        self.bindings.get(id).map(Arc::as_ref)
    }

    pub fn contains(&self, id: &Ident) -> bool {
        self.bindings.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &Ident> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, &Process)> {
        self.bindings.iter().map(|(k, v)| (k, v.as_ref()))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn inputs(&self, id: &Ident) -> &[Ident] {
        self.get(id).map(Process::inputs).unwrap_or(&[])
    }

    /// One history line body: `<id>:<U|I|S>:<inputs>` joined by tabs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (id, p)) in self.bindings.iter().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            let inputs: Vec<&str> = p.inputs().iter().map(Ident::as_str).collect();
            let _ = write!(out, "{id}:{}:{}", p.kind_letter(), inputs.join(","));
        }
        out
    }
}

/// φ: network snapshots indexed by the tick at which they were installed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SwitchHistory {
    snapshots: BTreeMap<u64, Arc<ProcEnv>>,
}

impl SwitchHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_initial(nu: ProcEnv) -> Self {
        let mut h = Self::new();
        h.record(0, nu);
        h
    }

    pub fn record(&mut self, t: u64, nu: ProcEnv) {
        self.snapshots.insert(t, Arc::new(nu));
    }

    /// The snapshot in force at `t`: the latest one recorded at or before it.
    pub fn at(&self, t: Timestamp) -> Result<&ProcEnv, EnvError> {
        let Timestamp::At(n) = t else {
            return Err(EnvError::NoSnapshot(t));
        };
        self.snapshots
            .range(..=n)
            .next_back()
            .map(|(_, v)| v.as_ref())
            .ok_or(EnvError::NoSnapshot(t))
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.snapshots.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &ProcEnv)> {
        self.snapshots.iter().map(|(k, v)| (*k, v.as_ref()))
    }

    /// Snapshots in force somewhere in `[from, to]`.
    pub fn in_window(&self, from: u64, to: u64) -> Vec<(u64, &ProcEnv)> {
        let start = self
            .snapshots
            .range(..=from)
            .next_back()
            .map(|(k, _)| *k)
            .unwrap_or(from);
        self.snapshots
            .range(start..=to)
            .map(|(k, v)| (*k, v.as_ref()))
            .collect()
    }

    /// `<time>\t<id>:<kind>:<inputs>\t...`, one line per snapshot.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, nu) in &self.snapshots {
            let _ = writeln!(out, "{t}\t{}", nu.render());
        }
        out
    }
}

/// Functional map update `m[k ↦ v]`.
pub fn env_update<K: Ord + Clone, V: Clone>(m: &BTreeMap<K, V>, k: K, v: V) -> BTreeMap<K, V> {
    let mut out = m.clone();
    out.insert(k, v);
    out
}

pub fn history_record(phi: &SwitchHistory, t: u64, nu: ProcEnv) -> SwitchHistory {
    let mut out = phi.clone();
    out.record(t, nu);
    out
}

pub fn history_at(phi: &SwitchHistory, t: Timestamp) -> Result<&ProcEnv, EnvError> {
    phi.at(t)
}

/// Kahn's algorithm with the smallest ready id first. `None` if cyclic.
pub fn topological_order(nodes: &BTreeSet<Ident>, edges: &BTreeMap<Ident, BTreeSet<Ident>>) -> Option<Vec<Ident>> {
    // edges: node -> its upstreams
    let mut pending: BTreeMap<&Ident, usize> = nodes
        .iter()
        .map(|n| {
            let deg = edges
                .get(n)
                .map(|ups| ups.iter().filter(|u| nodes.contains(*u)).count())
                .unwrap_or(0);
            (n, deg)
        })
        .collect();
    let mut downstream: BTreeMap<&Ident, Vec<&Ident>> = BTreeMap::new();
    for n in nodes {
        for u in edges.get(n).into_iter().flatten() {
            if nodes.contains(u) {
                downstream.entry(u).or_default().push(n);
            }
        }
    }
    let mut ready: BTreeSet<&Ident> = pending.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(n) = ready.pop_first() {
        order.push(n.clone());
        for d in downstream.get(n).into_iter().flatten() {
            let deg = pending.get_mut(d).unwrap();
            *deg -= 1;
            if *deg == 0 {
                ready.insert(d);
            }
        }
    }
    (order.len() == nodes.len()).then_some(order)
}

/// Upstream edges of a network.
pub fn network_edges(nu: &ProcEnv) -> BTreeMap<Ident, BTreeSet<Ident>> {
    nu.iter()
        .map(|(id, p)| (id.clone(), p.inputs().iter().cloned().collect()))
        .collect()
}

pub fn check_acyclic(nu: &ProcEnv) -> bool {
    let nodes: BTreeSet<Ident> = nu.ids().cloned().collect();
    let mut edges = network_edges(nu);
    // inputs outside the network cannot close a cycle
    for ups in edges.values_mut() {
        ups.retain(|u| nodes.contains(u));
    }
    topological_order(&nodes, &edges).is_some()
}
