//! Class-level timing inference.
//!
//! A class without upstreams runs at its declared period (or every tick when
//! it has none). A class with upstreams runs at the gcd of its upstream
//! periods under union and at their lcm under intersection. A declared
//! period on such a class must agree with that value.

use std::collections::{BTreeMap, BTreeSet};

use zdps_core::consistency::expected_tm;
use zdps_core::env::topological_order;
use zdps_core::Ident;

use crate::ast::ClassDecl;
use crate::timing::{seconds_to_ticks, timing_to_ticks, TimingSpec, Unit};
use crate::DslError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassTiming {
    pub tm: u64,
    /// True when the period came from the upstreams rather than `@timing`.
    pub inferred: bool,
}

fn check_members(c: &ClassDecl) -> Result<(), DslError> {
    let mut seen = BTreeSet::new();
    let names = c
        .signals()
        .chain(c.upstreams.iter().map(|(s, _)| s.as_str()))
        .chain(c.methods.iter().map(|(m, _)| m.as_str()));
    for n in names {
        if !seen.insert(n) {
            return Err(DslError::DuplicateMember {
                class: c.name.clone(),
                member: n.to_string(),
            });
        }
    }
    if c.signals().next().is_none() {
        return Err(DslError::BadAnnotation {
            class: c.name.clone(),
            message: "a signal class needs at least one signal".into(),
        });
    }
    Ok(())
}

/// Classes in wiring order: every class after the classes of its slots.
pub fn class_order(classes: &[ClassDecl]) -> Result<Vec<String>, DslError> {
    let mut nodes = BTreeSet::new();
    for c in classes {
        if !nodes.insert(Ident::new(&c.name)) {
            return Err(DslError::DuplicateClass(c.name.clone()));
        }
    }
    let mut edges = BTreeMap::new();
    for c in classes {
        let mut ups = BTreeSet::new();
        for (_, cls) in &c.upstreams {
            let id = Ident::new(cls);
            if !nodes.contains(&id) {
                return Err(DslError::UnknownClass(cls.clone()));
            }
            ups.insert(id);
        }
        edges.insert(Ident::new(&c.name), ups);
    }
    match topological_order(&nodes, &edges) {
        Some(order) => Ok(order.iter().map(|i| i.as_str().to_string()).collect()),
        None => {
            // the smallest class that cannot be ordered
            let placed: BTreeSet<Ident> = order_prefix(&nodes, &edges);
            let stuck = nodes.iter().find(|n| !placed.contains(*n)).unwrap();
            Err(DslError::CyclicWiring(stuck.as_str().to_string()))
        }
    }
}

fn order_prefix(nodes: &BTreeSet<Ident>, edges: &BTreeMap<Ident, BTreeSet<Ident>>) -> BTreeSet<Ident> {
    let mut placed = BTreeSet::new();
    loop {
        let next = nodes
            .iter()
            .find(|n| !placed.contains(*n) && edges[*n].iter().all(|u| placed.contains(u)));
        match next {
            Some(n) => {
                placed.insert(n.clone());
            }
            None => return placed,
        }
    }
}

/// Infer every class's period in ticks and reject annotations that
/// disagree with the wiring.
pub fn infer_and_check_annotations(
    classes: &[ClassDecl],
    tick_seconds: u64,
) -> Result<BTreeMap<String, ClassTiming>, DslError> {
    let order = class_order(classes)?;
    let by_name: BTreeMap<&str, &ClassDecl> = classes.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut out: BTreeMap<String, ClassTiming> = BTreeMap::new();
    for name in order {
        let c = by_name[name.as_str()];
        check_members(c)?;
        let declared = c.timing.as_ref().map(|t| timing_to_ticks(t, tick_seconds)).transpose()?;
        if let Some(secs) = c.checkpoint_interval {
            seconds_to_ticks(secs, tick_seconds)?;
        }
        let timing = if c.upstreams.is_empty() {
            ClassTiming {
                tm: declared.unwrap_or(1),
                inferred: false,
            }
        } else {
            let ups: Vec<u64> = c.upstreams.iter().map(|(_, cls)| out[cls].tm).collect();
            let expected = expected_tm(c.mode(), &ups).expect("non-empty upstreams");
            if let Some(d) = declared {
                if d != expected {
                    return Err(DslError::Annotation {
                        class: c.name.clone(),
                        expected,
                        declared: d,
                    });
                }
            }
            ClassTiming {
                tm: expected,
                inferred: true,
            }
        };
        out.insert(name, timing);
    }
    Ok(out)
}

/// Copy of `classes` with every timing made explicit. A period of one tick
/// becomes `anytime`. Feeding the result back through inference gives the
/// same periods.
pub fn annotate_classes(classes: &[ClassDecl], tick_seconds: u64) -> Result<Vec<ClassDecl>, DslError> {
    let timings = infer_and_check_annotations(classes, tick_seconds)?;
    Ok(classes
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if c.timing.is_none() {
                let tm = timings[&c.name].tm;
                c.timing = Some(if tm == 1 {
                    TimingSpec::Anytime
                } else {
                    TimingSpec::Every {
                        n: tm * tick_seconds,
                        unit: Unit::Sec,
                        base: None,
                    }
                });
            }
            c
        })
        .collect())
}
