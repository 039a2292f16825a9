use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zdps_core::engine::render_trace;
use zdps_core::oracle::{run_suite, OracleRegistry};
use zdps_cli::{CliError, RunOutput, Session, Settings};

/// Run, check and recover signal networks written in the signal-class language.
#[derive(Parser)]
#[command(name = "zdps", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the initial resolver and driver expression of a program.
    Parse {
        /// A `.zdps` program or a scenario file.
        input: PathBuf,
        #[arg(long)]
        tick_seconds: Option<u64>,
    },
    /// Execute a scenario and print its trace.
    Run {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Execute, then check time consistency at every step time.
    Check {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Check only this time.
        #[arg(long)]
        at: Option<u64>,
    },
    /// Execute with checkpoints and print the recovery reports.
    Recover {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Same as --recover-at.
        #[arg(long)]
        at: Vec<u64>,
    },
    /// Run a randomized property suite.
    Oracle {
        /// Suite name: thm31 or thm32.
        kind: String,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        cases: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    tick_seconds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Source feed: strict, scenario or noise.
    #[arg(long)]
    feed: Option<String>,
    /// Build the leading literals at tick zero and start the clock at one.
    #[arg(long)]
    prebuild: bool,
    /// Run a checkpoint right after the step at this time. Repeatable.
    #[arg(long)]
    recover_at: Vec<u64>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the trace here instead of standard output (run) or nowhere.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    dump_store: Option<PathBuf>,
    #[arg(long)]
    dump_history: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self, extra_checkpoints: &[u64]) -> Settings {
        Settings {
            ticks: self.ticks,
            tick_seconds: self.tick_seconds,
            seed: self.seed,
            feed: self.feed.clone(),
            prebuild: self.prebuild,
            recover_at: self.recover_at.iter().chain(extra_checkpoints).copied().collect(),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_outputs(out: &OutputArgs, run: &RunOutput, trace_to_stdout: bool) -> Result<String, CliError> {
    let trace = render_trace(&run.trace);
    let mut stdout = String::new();
    match &out.trace {
        Some(p) => write_file(p, &trace)?,
        None if trace_to_stdout => stdout = trace,
        None => {}
    }
    if let Some(p) = &out.dump_store {
        write_file(p, &run.state.mu.dump_store())?;
    }
    if let Some(p) = &out.dump_history {
        write_file(p, &run.state.phi.dump())?;
    }
    Ok(stdout)
}

/// Returns the text for standard output and the exit code.
fn execute(cmd: Command) -> Result<(String, u8), CliError> {
    match cmd {
        Command::Parse { input, tick_seconds } => {
            let settings = Settings {
                tick_seconds,
                ..Settings::default()
            };
            let session = Session::open(&input, &settings)?;
            let l = &session.lowered;
            let mut text = l.mu.dump_store();
            for (id, e) in l.mu.iter() {
                text.push_str(&format!("TIMING\t{id}\t{}\t{}\n", e.tm, e.mode));
            }
            text.push_str(&format!("EXPR\t{}\n", l.expr));
            Ok((text, 0))
        }
        Command::Run { input, run, out } => {
            let session = Session::open(&input, &run.settings(&[]))?;
            let result = session.run()?;
            Ok((write_outputs(&out, &result, true)?, 0))
        }
        Command::Check { input, run, out, at } => {
            let session = Session::open(&input, &run.settings(&[]))?;
            let result = session.run()?;
            write_outputs(&out, &result, false)?;
            let report = result.consistency(at)?;
            let code = if report.is_consistent() { 0 } else { 1 };
            Ok((report.to_string(), code))
        }
        Command::Recover { input, run, out, at } => {
            let session = Session::open(&input, &run.settings(&at))?;
            if session.checkpoints.is_empty() {
                return Err(CliError::Input("no checkpoint to run: pass --at T".into()));
            }
            let result = session.run()?;
            write_outputs(&out, &result, false)?;
            let text: String = result.reports.iter().map(|r| r.to_string()).collect();
            Ok((text, 0))
        }
        Command::Oracle { kind, cases, seed } => {
            let registry = OracleRegistry::builtin();
            let oracle = registry.get(&kind).ok_or_else(|| {
                let known: Vec<&str> = registry.names().collect();
                CliError::Input(format!("unknown oracle `{kind}` (known: {})", known.join(", ")))
            })?;
            let report = run_suite(oracle, seed, cases);
            let code = if report.ok() { 0 } else { 1 };
            Ok((report.to_string(), code))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((text, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("zdps: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
