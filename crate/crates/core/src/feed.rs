//! Source feeds: what a source instance emits at a tick.
//!
//! Feeds are registered by name so drivers can select one at runtime.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::{fnv64, Ident};

/// Outcome of sampling a source at one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeedSample {
    /// Fire and compute every column from the effects.
    Effects,
    /// Fire with some columns fixed. `None` addresses the first column.
    Values(Vec<(Option<String>, Ident)>),
    /// Do not fire.
    Silent,
}

pub trait SourceFeed: Send + Sync {
    fn name(&self) -> &str;
    fn sample(&self, source: &Ident, t: u64) -> FeedSample;
}

/// Every source fires on every eligible tick, computing its effects.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantFeed;

impl SourceFeed for ConstantFeed {
    fn name(&self) -> &str {
        "strict"
    }

    fn sample(&self, _: &Ident, _: u64) -> FeedSample {
        FeedSample::Effects
    }
}

/// Externally supplied values. Anytime sources only fire when a value is
/// present; other sources fall back to their effects.
#[derive(Clone, Debug, Default)]
pub struct StreamFeed {
    values: BTreeMap<(Ident, u64), Vec<(Option<String>, Ident)>>,
    anytime: BTreeSet<Ident>,
}

impl StreamFeed {
    pub fn new(config: &FeedConfig) -> Self {
        let mut values: BTreeMap<(Ident, u64), Vec<(Option<String>, Ident)>> = BTreeMap::new();
        for s in &config.streams {
            values
                .entry((s.source.clone(), s.t))
                .or_default()
                .push((s.column.clone(), s.value.clone()));
        }
        StreamFeed {
            values,
            anytime: config.anytime.clone(),
        }
    }
}

impl SourceFeed for StreamFeed {
    fn name(&self) -> &str {
        "scenario"
    }

    fn sample(&self, source: &Ident, t: u64) -> FeedSample {
        match self.values.get(&(source.clone(), t)) {
            Some(v) => FeedSample::Values(v.clone()),
            None if self.anytime.contains(source) => FeedSample::Silent,
            None => FeedSample::Effects,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamValue {
    pub source: Ident,
    pub column: Option<String>,
    pub t: u64,
    pub value: Ident,
}

#[derive(Clone, Debug, Default)]
pub struct FeedConfig {
    pub streams: Vec<StreamValue>,
    pub anytime: BTreeSet<Ident>,
    pub seed: u64,
    /// Columns a synthetic feed should fill, per source. Sources not listed
    /// get their first column filled.
    pub columns: BTreeMap<Ident, Vec<String>>,
}

/// Seeded pseudo-random readings in `0..100`, a pure function of
/// (seed, source, column, t). Anytime sources report on about one tick in
/// four. Explicit stream values still win.
#[derive(Clone, Debug, Default)]
pub struct NoiseFeed {
    streams: StreamFeed,
    seed: u64,
    columns: BTreeMap<Ident, Vec<String>>,
}

impl NoiseFeed {
    pub fn new(config: &FeedConfig) -> Self {
        NoiseFeed {
            streams: StreamFeed::new(config),
            seed: config.seed,
            columns: config.columns.clone(),
        }
    }

    fn draw(&self, source: &Ident, column: &str, t: u64) -> u64 {
        let key = format!("{}\0{}\0{}\0{}", self.seed, source, column, t);
        fnv64(key.as_bytes())
    }
}

impl SourceFeed for NoiseFeed {
    fn name(&self) -> &str {
        "noise"
    }

    fn sample(&self, source: &Ident, t: u64) -> FeedSample {
        match self.streams.sample(source, t) {
            FeedSample::Values(v) => return FeedSample::Values(v),
            FeedSample::Silent if self.draw(source, "", t) % 4 != 0 => return FeedSample::Silent,
            _ => {}
        }
        let values = match self.columns.get(source) {
            Some(cols) => cols
                .iter()
                .map(|c| (Some(c.clone()), Ident::new((self.draw(source, c, t) % 100).to_string())))
                .collect(),
            None => vec![(None, Ident::new((self.draw(source, "", t) % 100).to_string()))],
        };
        FeedSample::Values(values)
    }
}

type FeedCtor = fn(&FeedConfig) -> Box<dyn SourceFeed>;

pub struct FeedRegistry {
    ctors: BTreeMap<&'static str, FeedCtor>,
}

impl FeedRegistry {
    pub fn empty() -> Self {
        FeedRegistry { ctors: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("strict", |_| Box::new(ConstantFeed));
        r.register("scenario", |c| Box::new(StreamFeed::new(c)));
        r.register("noise", |c| Box::new(NoiseFeed::new(c)));
        r
    }

    pub fn register(&mut self, name: &'static str, ctor: FeedCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.ctors.keys().copied()
    }

    pub fn create(&self, name: &str, config: &FeedConfig) -> Option<Box<dyn SourceFeed>> {
        self.ctors.get(name).map(|c| c(config))
    }
}

impl Default for FeedRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
