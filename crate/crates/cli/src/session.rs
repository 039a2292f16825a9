//! Loading a scenario and running it.

use std::collections::BTreeSet;
use std::path::Path;

use zdps_core::consistency::{consistent_env, ConsistencyReport};
use zdps_core::engine::{step_in_place, Delivery, TraceRecord};
use zdps_core::feed::{FeedConfig, FeedRegistry, SourceFeed};
use zdps_core::recovery::{checkpoint_in_place, CheckpointState, RecoveryReport};
use zdps_core::{MachineState, Timestamp};
use zdps_dsl::Lowered;

use crate::scenario::Scenario;
use crate::CliError;

/// Command-line overrides applied on top of the scenario file.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub ticks: Option<u64>,
    pub tick_seconds: Option<u64>,
    pub seed: Option<u64>,
    pub feed: Option<String>,
    pub prebuild: bool,
    pub recover_at: Vec<u64>,
}

pub struct Session {
    pub scenario: Scenario,
    pub lowered: Lowered,
    pub feed: Box<dyn SourceFeed>,
    /// Times after whose step a checkpoint runs.
    pub checkpoints: BTreeSet<u64>,
}

pub struct RunOutput {
    pub state: MachineState,
    pub trace: Vec<TraceRecord>,
    pub reports: Vec<RecoveryReport>,
    pub checkpoint: CheckpointState,
    /// First step time.
    pub start: u64,
}

impl RunOutput {
    pub fn step_times(&self) -> std::ops::Range<u64> {
        self.start..self.state.t
    }

    /// Consistency of the final store at every step time, or only at `at`.
    pub fn consistency(&self, at: Option<u64>) -> Result<ConsistencyReport, CliError> {
        let times: Vec<u64> = match at {
            Some(t) if self.step_times().contains(&t) => vec![t],
            Some(t) => return Err(CliError::Input(format!("time {t} is outside the run {:?}", self.step_times()))),
            None => self.step_times().collect(),
        };
        let mut report = ConsistencyReport::default();
        for t in times {
            let nu = self
                .state
                .phi
                .at(Timestamp::At(t))
                .map_err(|e| CliError::Engine(e.to_string()))?;
            report.merge(consistent_env(&self.state.mu, nu, t));
        }
        Ok(report)
    }
}

fn is_program(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "zdps")
}

impl Session {
    /// Load a scenario file, or a `.zdps` program run with defaults.
    pub fn open(input: &Path, settings: &Settings) -> Result<Session, CliError> {
        let mut sc = if is_program(input) {
            Scenario::for_program(input.to_path_buf())
        } else {
            Scenario::load(input)?
        };
        if let Some(t) = settings.ticks {
            sc.ticks = t;
        }
        if let Some(t) = settings.tick_seconds {
            if t == 0 {
                return Err(CliError::Input("tick seconds must be at least 1".into()));
            }
            sc.tick_seconds = t;
        }
        if let Some(s) = settings.seed {
            sc.seed = s;
        }
        if let Some(f) = &settings.feed {
            sc.feed = Some(f.clone());
        }
        sc.prebuild |= settings.prebuild;
        sc.recover_at.extend(settings.recover_at.iter().copied());
        let src = std::fs::read_to_string(&sc.program)
            .map_err(|e| CliError::Input(format!("{}: {e}", sc.program.display())))?;
        let lowered = zdps_dsl::compile(&src, sc.tick_seconds)
            .map_err(|e| CliError::Input(format!("{}: {e}", sc.program.display())))?;
        Session::new(sc, lowered)
    }

    pub fn new(scenario: Scenario, lowered: Lowered) -> Result<Session, CliError> {
        if let Some(id) = scenario.mentioned_ids().into_iter().find(|id| !lowered.mu.contains(id)) {
            return Err(CliError::Input(format!("scenario mentions unknown id `{id}`")));
        }
        let feed_name = scenario.feed.clone().unwrap_or_else(|| {
            if scenario.streams.is_empty() { "strict" } else { "scenario" }.to_string()
        });
        let config = FeedConfig {
            streams: scenario.streams.clone(),
            anytime: lowered.anytime_sources.clone(),
            seed: scenario.seed,
            columns: lowered.inputs.clone(),
        };
        let registry = FeedRegistry::builtin();
        let feed = registry.create(&feed_name, &config).ok_or_else(|| {
            let known: Vec<&str> = registry.names().collect();
            CliError::Input(format!("unknown feed `{feed_name}` (known: {})", known.join(", ")))
        })?;

        let start = u64::from(scenario.prebuild);
        let times = start..start + scenario.ticks;
        let mut checkpoints: BTreeSet<u64> = times
            .clone()
            .filter(|t| *t > 0 && lowered.checkpoint_intervals.values().any(|i| t % i == 0))
            .collect();
        for t in &scenario.recover_at {
            if !times.contains(t) {
                return Err(CliError::Input(format!("checkpoint time {t} is outside the run {times:?}")));
            }
            checkpoints.insert(*t);
        }
        for t in scenario.faults.keys() {
            if !checkpoints.contains(t) {
                return Err(CliError::Input(format!("fault at {t} but no checkpoint runs then")));
            }
        }
        for t in scenario.loss.keys() {
            if !times.contains(t) {
                return Err(CliError::Input(format!("loss at {t} is outside the run {times:?}")));
            }
        }
        Ok(Session {
            scenario,
            lowered,
            feed,
            checkpoints,
        })
    }

    pub fn initial_state(&self) -> Result<MachineState, CliError> {
        Ok(self.lowered.initial_state(self.scenario.prebuild)?)
    }

    /// Checkpoint state before the first tick. A prebuilt network starts
    /// from an implicit checkpoint at zero: nothing ran before the clock
    /// started, so nothing there needs recovery.
    pub fn initial_checkpoint(&self, s: &MachineState) -> CheckpointState {
        let mut cp = CheckpointState::new();
        if s.t > 0 {
            for id in s.mu.ids() {
                cp.advance(id, s.t - 1);
            }
        }
        cp
    }

    /// Run every tick, losing what the scenario says and checkpointing
    /// right after the step at each checkpoint time.
    pub fn run(&self) -> Result<RunOutput, CliError> {
        self.run_with(&self.checkpoints, true)
    }

    /// Run with a chosen set of checkpoint times, with or without the
    /// scenario's losses.
    pub fn run_with(&self, checkpoints: &BTreeSet<u64>, with_loss: bool) -> Result<RunOutput, CliError> {
        let mut s = self.initial_state()?;
        let start = s.t;
        let mut trace = Vec::new();
        let mut reports = Vec::new();
        let mut cp = self.initial_checkpoint(&s);
        let none = BTreeSet::new();
        for _ in 0..self.scenario.ticks {
            let t = s.t;
            let delivery = match self.scenario.loss.get(&t) {
                Some(lost) if with_loss => Delivery::Except(lost.clone()),
                _ => Delivery::Full,
            };
            trace.extend(step_in_place(&mut s, &delivery, self.feed.as_ref())?.trace());
            if checkpoints.contains(&t) {
                let fault = self.scenario.faults.get(&t).unwrap_or(&none);
                reports.push(checkpoint_in_place(&mut s.mu, &s.phi, &mut cp, t, fault, self.feed.as_ref())?);
            }
        }
        Ok(RunOutput {
            state: s,
            trace,
            reports,
            checkpoint: cp,
            start,
        })
    }
}
