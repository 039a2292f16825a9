//! Scenario files.
//!
//! ```text
//! program = fivenode.zdps
//! ticks = 6
//! prebuild = true
//! recover_at = 5
//!
//! [loss]
//! 1: l3
//!
//! [faults]
//! 5: l3
//!
//! [streams]
//! l1@2 = 40
//! l1.a@3 = 41
//! ```
//!
//! Top-level keys come before any section. `#` starts a comment. Relative
//! program paths are taken from the scenario file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use zdps_core::engine::LossSchedule;
use zdps_core::feed::StreamValue;
use zdps_core::Ident;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub program: PathBuf,
    pub ticks: u64,
    pub tick_seconds: u64,
    pub seed: u64,
    pub feed: Option<String>,
    pub prebuild: bool,
    pub recover_at: BTreeSet<u64>,
    pub loss: LossSchedule,
    pub faults: BTreeMap<u64, BTreeSet<Ident>>,
    pub streams: Vec<StreamValue>,
}

impl Scenario {
    /// A bare program run: one tick, strict feed, nothing injected.
    pub fn for_program(program: PathBuf) -> Self {
        Scenario {
            program,
            ticks: 1,
            tick_seconds: 1,
            seed: 0,
            feed: None,
            prebuild: false,
            recover_at: BTreeSet::new(),
            loss: LossSchedule::new(),
            faults: BTreeMap::new(),
            streams: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        parse_scenario(&text, base).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Ids mentioned by the loss, fault and stream sections.
    pub fn mentioned_ids(&self) -> BTreeSet<&Ident> {
        self.loss
            .values()
            .chain(self.faults.values())
            .flatten()
            .chain(self.streams.iter().map(|s| &s.source))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Loss,
    Faults,
    Streams,
}

fn num<T: FromStr>(line: usize, what: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}: bad {what} `{}`", s.trim())))
}

fn id_list(line: usize, s: &str) -> Result<BTreeSet<Ident>, CliError> {
    let ids: BTreeSet<Ident> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(Ident::new)
        .collect();
    if ids.is_empty() {
        return Err(CliError::Input(format!("line {line}: empty id list")));
    }
    Ok(ids)
}

pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario, CliError> {
    let mut sc = Scenario::for_program(PathBuf::new());
    let mut program = None;
    let mut section = Section::Top;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "loss" => Section::Loss,
                "faults" => Section::Faults,
                "streams" => Section::Streams,
                other => return Err(CliError::Input(format!("line {n}: unknown section [{other}]"))),
            };
            continue;
        }
        let bad = || CliError::Input(format!("line {n}: cannot parse `{line}`"));
        match section {
            Section::Top => {
                let (k, v) = line.split_once('=').ok_or_else(bad)?;
                let v = v.trim();
                match k.trim() {
                    "program" => program = Some(base.join(v)),
                    "ticks" => sc.ticks = num(n, "tick count", v)?,
                    "tick_seconds" => sc.tick_seconds = num(n, "tick length", v)?,
                    "seed" => sc.seed = num(n, "seed", v)?,
                    "feed" => sc.feed = Some(v.to_string()),
                    "prebuild" => sc.prebuild = num(n, "flag", v)?,
                    "recover_at" => {
                        for t in v.split(',') {
                            sc.recover_at.insert(num(n, "checkpoint time", t)?);
                        }
                    }
                    other => return Err(CliError::Input(format!("line {n}: unknown key `{other}`"))),
                }
            }
            Section::Loss | Section::Faults => {
                let (t, ids) = line.split_once(':').ok_or_else(bad)?;
                let t: u64 = num(n, "time", t)?;
                let ids = id_list(n, ids)?;
                let map = if section == Section::Loss {
                    &mut sc.loss
                } else {
                    &mut sc.faults
                };
                map.entry(t).or_default().extend(ids);
            }
            Section::Streams => {
                let (lhs, value) = line.split_once('=').ok_or_else(bad)?;
                let (target, t) = lhs.split_once('@').ok_or_else(bad)?;
                let (source, column) = match target.trim().split_once('.') {
                    Some((s, c)) => (s.trim(), Some(c.trim().to_string())),
                    None => (target.trim(), None),
                };
                let value = value.trim();
                if source.is_empty() || value.is_empty() {
                    return Err(bad());
                }
                sc.streams.push(StreamValue {
                    source: Ident::new(source),
                    column,
                    t: num(n, "time", t)?,
                    value: Ident::new(value),
                });
            }
        }
    }
    sc.program = program.ok_or_else(|| CliError::Input("no `program = ...` line".into()))?;
    if sc.tick_seconds == 0 {
        return Err(CliError::Input("tick_seconds must be at least 1".into()));
    }
    Ok(sc)
}
