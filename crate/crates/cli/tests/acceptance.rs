//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so the lines
//! always show.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use zdps_cli::{Session, Settings};
use zdps_core::consistency::equiv_records_upto;
use zdps_core::fixtures::five_node_network;
use zdps_core::recovery::checkpoint_in_place;
use zdps_core::{Ident, Timestamp};
use zdps_dsl::{annotate_classes, compile, parse_program, DslError, TimingSpec};

type Verdict = Result<String, String>;

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

fn scenario(name: &str) -> PathBuf {
    dir().join("scenarios").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(dir().join("tests/golden").join(name)).expect("golden file")
}

fn zdps(args: &[&str]) -> (i32, String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_zdps"))
        .args(args)
        .output()
        .expect("run zdps");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("utf-8 output"),
        start.elapsed(),
    )
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn oracle(kind: &str, budget: Duration) -> Verdict {
    let (code, out, took) = zdps(&["oracle", kind, "--cases", "500", "--seed", "42"]);
    let summary = out.lines().last().unwrap_or("").to_string();
    check(code == 0, format!("exit {code}: {}", out.trim()))?;
    check(took < budget, format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(format!("{summary} in {took:.2?}"))
}

fn fired_at(trace: &str, t: &str) -> Vec<String> {
    trace
        .lines()
        .map(|l| l.split('\t').collect::<Vec<_>>())
        .filter(|f| f[0] == t && f[1] == "FIRE")
        .map(|f| f[2].to_string())
        .collect()
}

fn five_node_golden() -> Verdict {
    let path = scenario("fivenode.scn");
    let (code, trace, _) = zdps(&["run", path.to_str().unwrap()]);
    check(code == 0, format!("exit {code}"))?;
    check(trace == golden("fivenode.trace"), "trace differs from the golden file")?;
    let order = fired_at(&trace, "1");
    let set: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    check(
        set == ["l1", "l2", "l3", "l4", "l5"].into(),
        format!("first propagation fired {order:?}"),
    )?;
    let pos = |id: &str| order.iter().position(|x| x == id).unwrap();
    check(
        pos("l3") > pos("l1").min(pos("l2")),
        "l3 fired before both of its inputs",
    )?;
    check(
        pos("l5") > pos("l3") && pos("l5") > pos("l4"),
        "l5 fired before one of its inputs",
    )?;
    Ok(format!("firing order {}", order.join(",")))
}

fn switch_golden() -> Verdict {
    let path = scenario("switch.scn");
    let hist = std::env::temp_dir().join(format!("zdps-switch-{}.history", std::process::id()));
    let (code, trace, _) = zdps(&["run", path.to_str().unwrap(), "--dump-history", hist.to_str().unwrap()]);
    let history = std::fs::read_to_string(&hist).unwrap_or_default();
    let _ = std::fs::remove_file(&hist);
    check(code == 0, format!("exit {code}"))?;
    check(trace == golden("switch.trace"), "trace differs from the golden file")?;
    check(history == golden("switch.history"), "switch history differs from the golden file")?;
    let rules: Vec<&str> = trace.lines().filter(|l| l.contains("\tRULE\t")).collect();
    check(
        rules.len() == 3
            && rules[0] == "1\tRULE\tR-OBJ\tl5.setu(l3, l6)"
            && rules[1] == "2\tRULE\tR-SETU\tl5"
            && rules[2].starts_with("3\tRULE\tNOOP"),
        format!("rules {rules:?}"),
    )?;

    let session = Session::open(&path, &Settings::default()).map_err(|e| e.to_string())?;
    let run = session.run().map_err(|e| e.to_string())?;
    let phi = &run.state.phi;
    let at = |t: u64| phi.at(Timestamp::At(t)).map_err(|e| e.to_string());
    check(phi.times().collect::<Vec<_>>() == [0, 1, 2], "snapshot times")?;
    check(at(0)? == &five_node_network(), "pre-switch topology is not the five-node network")?;
    let l5: Ident = "l5".into();
    check(
        at(1)?.contains(&"l6".into()) && at(1)?.inputs(&l5) == [Ident::new("l3"), Ident::new("l4")],
        "after creation l6 exists and l5 still reads l3, l4",
    )?;
    for t in [2, 3, 99] {
        check(
            at(t)?.inputs(&l5) == [Ident::new("l3"), Ident::new("l6")],
            format!("lookup at {t} does not see the switch"),
        )?;
    }
    check(run.state.t == 4, "time advanced once per step")?;
    Ok("R-OBJ, R-SETU; snapshots 0,1,2; lookups at 0,1,2,3,99 straddle correctly".into())
}

fn protocol() -> Verdict {
    let s = Session::open(&scenario("fivenode-loss.scn"), &Settings::default()).map_err(|e| e.to_string())?;
    let baseline = s.run_with(&BTreeSet::new(), false).map_err(|e| e.to_string())?;
    let lossy = s.run_with(&BTreeSet::new(), true).map_err(|e| e.to_string())?;
    let equal = |a, b, t| equiv_records_upto(a, b, Timestamp::At(t)).unwrap_or(false);
    check(
        !equal(&lossy.state.mu, &baseline.state.mu, 5),
        "the loss left no trace to recover",
    )?;
    let recovered = s.run().map_err(|e| e.to_string())?;
    check(
        equal(&recovered.state.mu, &baseline.state.mu, 5),
        "recovered store differs from the loss-free baseline",
    )?;
    let repaired: Vec<(String, u64)> = recovered.reports[0]
        .repaired
        .iter()
        .map(|r| (r.id.to_string(), r.t))
        .collect();
    check(
        repaired == [("l3".to_string(), 1), ("l5".to_string(), 1)],
        format!("repaired {repaired:?}"),
    )?;

    let f = Session::open(&scenario("fivenode-fault.scn"), &Settings::default()).map_err(|e| e.to_string())?;
    let run = f.run().map_err(|e| e.to_string())?;
    let first = &run.reports[0];
    let blocked: Vec<&str> = first.blocked.iter().map(Ident::as_str).collect();
    check(blocked == ["l3", "l5"], format!("blocked {blocked:?}"))?;
    check(
        first.advanced.iter().map(Ident::as_str).collect::<Vec<_>>() == ["l1", "l2", "l4"],
        "sources should advance",
    )?;
    // replay up to the faulted checkpoint to read the checkpoint times there
    let mut st = f.initial_state().map_err(|e| e.to_string())?;
    let mut cp = f.initial_checkpoint(&st);
    let before = (cp.last(&"l3".into()), cp.last(&"l5".into()));
    for _ in 0..5 {
        let t = st.t;
        let d = match f.scenario.loss.get(&t) {
            Some(l) => zdps_core::engine::Delivery::Except(l.clone()),
            None => zdps_core::engine::Delivery::Full,
        };
        zdps_core::engine::step_in_place(&mut st, &d, f.feed.as_ref()).map_err(|e| e.to_string())?;
    }
    checkpoint_in_place(&mut st.mu, &st.phi, &mut cp, 5, &f.scenario.faults[&5], f.feed.as_ref())
        .map_err(|e| e.to_string())?;
    check(
        (cp.last(&"l3".into()), cp.last(&"l5".into())) == before,
        "faulted instances moved their last checkpoint",
    )?;
    let second = &run.reports[1];
    check(
        second.blocked.is_empty() && second.advanced.len() == 5 && second.repaired.len() == 2,
        format!("second checkpoint: {second}"),
    )?;
    let base8 = f.run_with(&BTreeSet::new(), false).map_err(|e| e.to_string())?;
    check(
        equal(&run.state.mu, &base8.state.mu, 8),
        "store after the second checkpoint differs from the baseline",
    )?;
    Ok("loss at 1 repaired at 5; fault blocks l3,l5 and keeps their checkpoint; checkpoint at 8 repairs".into())
}

fn class_tm(src: &str, class: &str, tick: u64) -> Result<u64, DslError> {
    let l = compile(src, tick)?;
    Ok(l.timings[class].tm)
}

fn wellformedness() -> Verdict {
    let pair = |a: u32, b: u32| {
        format!(
            "@timing(\"every {a} sec\") signal class S1 {{ persistent signal v; }}\n\
             @timing(\"every {b} sec\") signal class S2 {{ persistent signal v; }}\n"
        )
    };
    let union = format!("{}@mode(\"union\") signal class J {{ S1 a; S2 b; signal x = f(a.v, b.v); }}", pair(30, 45));
    check(class_tm(&union, "J", 1) == Ok(15), "union over 30, 45")?;
    let inter = format!(
        "{}@mode(\"intersection\") @timing(\"every 6 sec\") signal class J {{ S1 a; S2 b; signal x = f(a.v, b.v); }}",
        pair(2, 3)
    );
    check(class_tm(&inter, "J", 1) == Ok(6), "intersection over 2, 3 with declared 6")?;
    let faster = format!(
        "{}@mode(\"union\") @timing(\"every 5 sec\") signal class J {{ S1 a; S2 b; signal x = a.v; }}",
        pair(30, 45)
    );
    let err = class_tm(&faster, "J", 1);
    check(
        err == Err(DslError::Annotation {
            class: "J".into(),
            expected: 15,
            declared: 5,
        }),
        format!("declared-faster class gave {err:?}"),
    )?;
    Ok("(30,45) union -> 15; (2,3) intersection -> 6; declared 5 over gcd 15 rejected".into())
}

fn dsl_conformance() -> Verdict {
    let src = std::fs::read_to_string(scenario("monitoring.zdps")).map_err(|e| e.to_string())?;
    let program = parse_program(&src).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for (tick, want) in [(5, [1, 12, 1, 1]), (1, [5, 60, 1, 1])] {
        let l = compile(&src, tick).map_err(|e| e.to_string())?;
        let got = ["Traffic", "Ping", "IDS", "Monitor"].map(|c| l.timings[c].tm);
        check(got == want, format!("tick {tick}s: {got:?}, expected {want:?}"))?;
        seen.push(format!("{tick}s:{got:?}"));
    }
    let annotated = annotate_classes(&program.classes, 5).map_err(|e| e.to_string())?;
    let monitor = annotated.iter().find(|c| c.name == "Monitor").unwrap();
    check(monitor.timing == Some(TimingSpec::Anytime), "Monitor is not anytime")?;
    check(
        matches!(compile(&src, 2), Err(DslError::IndivisiblePeriod { .. })),
        "5 s period accepted with 2 s ticks",
    )?;
    Ok(format!("Traffic/Ping/IDS/Monitor ticks {}; Monitor inferred anytime", seen.join(" ")))
}

fn desk_scale(name: &str) -> Verdict {
    let s = Session::open(&scenario(name), &Settings::default()).map_err(|e| e.to_string())?;
    let none = BTreeSet::new();
    let lossy = s.run_with(&none, true).map_err(|e| e.to_string())?;
    let baseline = s.run_with(&none, false).map_err(|e| e.to_string())?;
    let rows = lossy.state.mu.row_count();
    check(rows >= 10_000, format!("only {rows} stored rows"))?;
    let cp_t = lossy.state.t - 1;

    let mut st = lossy.state;
    let mut cp = s.initial_checkpoint(&s.initial_state().map_err(|e| e.to_string())?);
    let start = Instant::now();
    let report = checkpoint_in_place(&mut st.mu, &st.phi, &mut cp, cp_t, &BTreeSet::new(), s.feed.as_ref())
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(took < Duration::from_secs(1), format!("checkpoint took {took:.2?}"))?;
    check(!report.repaired.is_empty(), "losses produced nothing to repair")?;
    check(
        equiv_records_upto(&st.mu, &baseline.state.mu, Timestamp::At(cp_t)).unwrap_or(false),
        "recovered store differs from the loss-free baseline",
    )?;

    // idempotence on a loss-free run, and on a second pass over the same window
    let mut clean = baseline.state.clone();
    let mut cp2 = s.initial_checkpoint(&s.initial_state().map_err(|e| e.to_string())?);
    let r = checkpoint_in_place(&mut clean.mu, &clean.phi, &mut cp2, cp_t, &BTreeSet::new(), s.feed.as_ref())
        .map_err(|e| e.to_string())?;
    check(r.repaired.is_empty(), format!("loss-free run repaired {} rows", r.repaired.len()))?;
    check(clean.mu.dump_store() == baseline.state.mu.dump_store(), "loss-free store changed")?;
    let mut again = s.initial_checkpoint(&s.initial_state().map_err(|e| e.to_string())?);
    let r2 = checkpoint_in_place(&mut st.mu, &st.phi, &mut again, cp_t, &BTreeSet::new(), s.feed.as_ref())
        .map_err(|e| e.to_string())?;
    check(r2.repaired.is_empty(), "second recovery pass changed rows")?;
    Ok(format!(
        "{rows} rows, {} repaired, checkpoint {took:.2?}, idempotent",
        report.repaired.len()
    ))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("thm31 property suite (500 cases, seed 42, < 30 s)", Box::new(|| oracle("thm31", Duration::from_secs(30)))),
        ("thm32 recovery oracle (500 cases, seed 42, < 60 s)", Box::new(|| oracle("thm32", Duration::from_secs(60)))),
        ("five-node golden trace and precedence", Box::new(five_node_golden)),
        ("switching golden trace and history lookups", Box::new(switch_golden)),
        ("checkpoint protocol: loss, fault, later repair", Box::new(protocol)),
        ("well-formedness of timing annotations", Box::new(wellformedness)),
        ("DSL conformance on the monitoring program", Box::new(dsl_conformance)),
        ("desk scale: waterlevel", Box::new(|| desk_scale("waterlevel.scn"))),
        ("desk scale: treadmill", Box::new(|| desk_scale("treadmill.scn"))),
        ("desk scale: traffic", Box::new(|| desk_scale("traffic.scn"))),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
