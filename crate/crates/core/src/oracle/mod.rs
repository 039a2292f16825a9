//! Executable correctness properties, registered by name.
//!
//! Each case is generated from its own seed, so a failing case can be
//! replayed alone by running one case with that seed.

pub mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::Ident;
use crate::consistency::{consistent_env, timing_hypothesis_holds, wellformed_env};
use crate::engine::{eligible, step, Delivery};
use crate::feed::ConstantFeed;
use crate::recovery::{recomputation_oracle, RecoveryError};
use crate::store::Timestamp;

const ATTEMPTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseOutcome {
    Pass,
    /// The premise did not apply; a weaker property was checked instead.
    Vacuous,
    Fail(String),
}

pub trait Oracle: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn check(&self, seed: u64) -> CaseOutcome;
}

/// Consistency is preserved by a full step.
pub struct ConsistencyOracle;

impl Oracle for ConsistencyOracle {
    fn name(&self) -> &'static str {
        "thm31"
    }

    fn describe(&self) -> &'static str {
        "a complete step leaves every instance consistent at the stepped tick"
    }

    fn check(&self, seed: u64) -> CaseOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..ATTEMPTS {
            let Some(case) = gen::random_case(&mut rng, true) else {
                continue;
            };
            let s = &case.state;
            let t = s.t;
            if !wellformed_env(&s.mu, &s.nu)
                || s.phi.at(Timestamp::At(t)).ok() != Some(&s.nu)
                || !timing_hypothesis_holds(&s.mu, t)
            {
                return CaseOutcome::Fail("generator produced a state outside the premise".into());
            }
            let Ok(r) = step(s, &Delivery::Full, &ConstantFeed) else {
                continue;
            };
            let after = &r.state_after;
            let Ok(nu_t) = after.phi.at(Timestamp::At(t)) else {
                return CaseOutcome::Fail(format!("no topology at {t}"));
            };
            let report = consistent_env(&after.mu, nu_t, t);
            let fired: BTreeSet<Ident> = r.outcome.fired.iter().cloned().collect();
            let complete = fired == eligible(&after.nu, &s.mu, t);
            if complete {
                return match report.violations.first() {
                    None => CaseOutcome::Pass,
                    Some(v) => CaseOutcome::Fail(format!("{v} after a complete step")),
                };
            }
            // Not every eligible instance fired, so the step is not a
            // complete propagation. Only stray rows may then break consistency.
            return match report
                .violations
                .iter()
                .find(|v| !(case.stray.contains(&v.id) && !fired.contains(&v.id)))
            {
                None => CaseOutcome::Vacuous,
                Some(v) => CaseOutcome::Fail(format!("{v} not explained by a stray row")),
            };
        }
        CaseOutcome::Fail("could not generate a case".into())
    }
}

/// Re-executing a lossy step from the previous topology matches the full step.
pub struct RecomputationOracle;

impl Oracle for RecomputationOracle {
    fn name(&self) -> &'static str {
        "thm32"
    }

    fn describe(&self) -> &'static str {
        "re-executing a lossy step reproduces the full step"
    }

    fn check(&self, seed: u64) -> CaseOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..ATTEMPTS {
            let Some(case) = gen::random_case(&mut rng, false) else {
                continue;
            };
            let s = &case.state;
            let deliver: BTreeSet<Ident> = match rng.random_range(0..4u8) {
                0 => BTreeSet::new(),
                1 => s.mu.ids().cloned().collect(),
                _ => s.mu.ids().filter(|_| rng.random_bool(0.5)).cloned().collect(),
            };
            match recomputation_oracle(s, &deliver, &ConstantFeed) {
                Ok(v) if v.holds() => return CaseOutcome::Pass,
                Ok(v) => {
                    return CaseOutcome::Fail(format!("t={} failed: {}", v.t, v.failed().join(",")));
                }
                Err(RecoveryError::Hypothesis(_)) | Err(RecoveryError::Engine(_)) => continue,
                Err(e) => return CaseOutcome::Fail(e.to_string()),
            }
        }
        CaseOutcome::Fail("could not generate a case".into())
    }
}

pub struct OracleRegistry {
    oracles: BTreeMap<&'static str, Box<dyn Oracle>>,
}

impl OracleRegistry {
    pub fn empty() -> Self {
        OracleRegistry {
            oracles: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ConsistencyOracle));
        r.register(Box::new(RecomputationOracle));
        r
    }

    pub fn register(&mut self, o: Box<dyn Oracle>) {
        self.oracles.insert(o.name(), o);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Oracle> {
        self.oracles.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.oracles.keys().copied()
    }
}

impl Default for OracleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub seed: u64,
    pub cases: u64,
    pub passed: u64,
    pub vacuous: u64,
    /// (case seed, message)
    pub failures: Vec<(u64, String)>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (seed, msg) in &self.failures {
            writeln!(f, "FAIL\t{seed}\t{msg}")?;
        }
        writeln!(
            f,
            "{}\tseed={}\tcases={}\tpassed={}\tvacuous={}\tfailed={}",
            self.name,
            self.seed,
            self.cases,
            self.passed,
            self.vacuous,
            self.failures.len()
        )
    }
}

/// Case `i` runs with seed `seed + i`.
pub fn run_suite(oracle: &dyn Oracle, seed: u64, cases: u64) -> SuiteReport {
    let mut report = SuiteReport {
        name: oracle.name(),
        seed,
        cases,
        passed: 0,
        vacuous: 0,
        failures: Vec::new(),
    };
    for i in 0..cases {
        let case_seed = seed.wrapping_add(i);
        match oracle.check(case_seed) {
            CaseOutcome::Pass => report.passed += 1,
            CaseOutcome::Vacuous => report.vacuous += 1,
            CaseOutcome::Fail(msg) => report.failures.push((case_seed, msg)),
        }
    }
    report
}
