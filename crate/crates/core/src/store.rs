//! Time-series store: one relation per instance, keyed by logical time.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::calculus::Ident;

/// Logical time, extended with the pre-history marker `⊥` that precedes
/// every tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timestamp {
    Bottom,
    At(u64),
}

impl Timestamp {
    /// The tick just before `t`, or `⊥` for tick zero.
    pub fn before(t: u64) -> Timestamp {
        match t {
            0 => Timestamp::Bottom,
            n => Timestamp::At(n - 1),
        }
    }

    pub fn tick(self) -> Option<u64> {
        match self {
            Timestamp::Bottom => None,
            Timestamp::At(t) => Some(t),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Bottom => f.write_str("BOT"),
            Timestamp::At(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("row has {found} values, schema has {expected} columns")]
    ArityMismatch { expected: usize, found: usize },
    #[error("no column named `{0}`")]
    UnknownColumn(String),
}

/// Rows of one instance. The `⊥` row always exists, so a read never misses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    schema: Vec<String>,
    rows: BTreeMap<Timestamp, Vec<Ident>>,
}

impl Relation {
    pub fn new(schema: Vec<String>, initial: Vec<Ident>) -> Result<Self, StoreError> {
        if schema.len() != initial.len() {
            return Err(StoreError::ArityMismatch {
                expected: schema.len(),
                found: initial.len(),
            });
        }
        let mut rows = BTreeMap::new();
        rows.insert(Timestamp::Bottom, initial);
        Ok(Relation { schema, rows })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn column(&self, p: &str) -> Result<usize, StoreError> {
        self.schema
            .iter()
            .position(|c| c == p)
            .ok_or_else(|| StoreError::UnknownColumn(p.to_string()))
    }

    /// Insert or overwrite the row at `t`. Returns the previous row, if any.
    pub fn insert(&mut self, t: u64, values: Vec<Ident>) -> Result<Option<Vec<Ident>>, StoreError> {
        if values.len() != self.schema.len() {
            return Err(StoreError::ArityMismatch {
                expected: self.schema.len(),
                found: values.len(),
            });
        }
        Ok(self.rows.insert(Timestamp::At(t), values))
    }

    /// Functional form of [`Relation::insert`].
    pub fn with_row(&self, t: u64, values: Vec<Ident>) -> Result<Relation, StoreError> {
        let mut r = self.clone();
        r.insert(t, values)?;
        Ok(r)
    }

    /// The most recent row at or before `t`.
    pub fn latest_row_at(&self, t: Timestamp) -> (Timestamp, &[Ident]) {
        let (k, v) = self
            .rows
            .range(..=t)
            .next_back()
            .expect("relation always holds a bottom row");
        (*k, v)
    }

    /// Value of column `p` in the most recent row at or before `t`.
    pub fn latest_at(&self, p: &str, t: Timestamp) -> Result<&Ident, StoreError> {
        let i = self.column(p)?;
        Ok(&self.latest_row_at(t).1[i])
    }

    pub fn has_record_at(&self, t: Timestamp) -> bool {
        self.rows.contains_key(&t)
    }

    pub fn row_at(&self, t: Timestamp) -> Option<&[Ident]> {
        self.rows.get(&t).map(Vec::as_slice)
    }

    /// Ticks holding a row, up to and including `t`; `⊥` is excluded.
    pub fn timestamps_upto(&self, t: Timestamp) -> Vec<u64> {
        self.rows.range(..=t).filter_map(|(k, _)| k.tick()).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = (Timestamp, &[Ident])> {
        self.rows.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Number of rows, the `⊥` row included.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rows at or before `t`, for comparisons.
    pub fn rows_upto(&self, t: Timestamp) -> impl Iterator<Item = (&Timestamp, &Vec<Ident>)> {
        self.rows.range(..=t)
    }

    /// Drop every row strictly after `t`.
    pub fn truncate_after(&mut self, t: Timestamp) {
        let _ = self.rows.split_off(&next(t));
    }

    pub fn remove(&mut self, t: u64) -> Option<Vec<Ident>> {
        self.rows.remove(&Timestamp::At(t))
    }
}

fn next(t: Timestamp) -> Timestamp {
    match t {
        Timestamp::Bottom => Timestamp::At(0),
        Timestamp::At(n) => Timestamp::At(n.saturating_add(1)),
    }
}

/// Render one store row as `<id>\t<time>\t<p>=<v>\t...`.
pub fn dump_row(out: &mut String, id: &Ident, schema: &[String], t: Timestamp, row: &[Ident]) {
    use fmt::Write;
    let _ = write!(out, "{id}\t{t}");
    for (p, v) in schema.iter().zip(row) {
        let _ = write!(out, "\t{p}={v}");
    }
    out.push('\n');
}
