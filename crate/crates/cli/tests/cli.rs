use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn zdps(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_zdps")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("zdps-cli-{}-{name}", std::process::id()))
}

#[test]
fn traces_match_goldens() {
    let (code, out, _) = zdps(&["run", &scenario("fivenode.scn")]);
    assert_eq!(code, 0);
    assert_eq!(out, golden("fivenode.trace"));

    let hist = temp("switch.history");
    let (code, out, _) = zdps(&["run", &scenario("switch.scn"), "--dump-history", hist.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out, golden("switch.trace"));
    assert_eq!(std::fs::read_to_string(&hist).unwrap(), golden("switch.history"));
    std::fs::remove_file(hist).unwrap();
}

#[test]
fn runs_are_deterministic() {
    for name in ["monitoring.scn", "fivenode-fault.scn"] {
        let a = zdps(&["run", &scenario(name)]);
        let b = zdps(&["run", &scenario(name)]);
        assert_eq!(a, b, "{name}");
        assert!(!a.1.is_empty());
    }
}

#[test]
fn trace_flag_moves_the_trace_to_a_file() {
    let path = temp("fivenode.trace");
    let (code, out, _) = zdps(&["run", &scenario("fivenode.scn"), "--trace", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), golden("fivenode.trace"));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn check_reports_loss_until_recovered() {
    assert_eq!(zdps(&["check", &scenario("fivenode.scn")]), (0, "OK\n".into(), String::new()));
    // the same loss with no checkpoint
    let scn = temp("loss.scn");
    std::fs::write(&scn, format!("program = {}\nprebuild = true\nticks = 5\n[loss]\n1: l3\n", scenario("fivenode.zdps"))).unwrap();
    let scn = scn.to_str().unwrap();
    let (code, out, _) = zdps(&["check", scn]);
    assert_eq!(code, 1);
    assert_eq!(out, "VIOLATION\t1\tl3\tunion\n");
    let (code, out, _) = zdps(&["check", scn, "--recover-at", "5"]);
    assert_eq!((code, out.as_str()), (0, "OK\n"));
    std::fs::remove_file(scn).unwrap();
    assert_eq!(zdps(&["check", &scenario("fivenode-loss.scn")]).0, 0);
    let (code, _, _) = zdps(&["check", &scenario("fivenode-loss.scn"), "--at", "2"]);
    assert_eq!(code, 0);
}

#[test]
fn recover_prints_reports() {
    let (code, out, _) = zdps(&["recover", &scenario("fivenode-fault.scn")]);
    assert_eq!(code, 0);
    assert!(out.contains("BLOCKED"), "{out}");
    assert!(out.contains("REPAIRED\tl3\t1"), "{out}");
    let (code, _, err) = zdps(&["recover", &scenario("fivenode.scn")]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn parse_prints_resolver_and_expression() {
    let (code, out, _) = zdps(&["parse", &scenario("fivenode.zdps")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("l1\tBOT\ta=la\n"));
    assert!(out.contains("TIMING\tl5\t1\tintersection\n"));
    assert!(out.lines().last().unwrap().starts_with("EXPR\tl5["));
}

#[test]
fn oracles_run_and_fail_on_bad_input() {
    let (code, out, _) = zdps(&["oracle", "thm31", "--cases", "10"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(zdps(&["oracle", "thm99"]).0, 2);
    assert_eq!(zdps(&["oracle", "thm32", "--cases", "0"]).0, 2);
}

#[test]
fn input_errors_exit_two() {
    let bad_scn = temp("bad.scn");
    std::fs::write(&bad_scn, format!("program = {}\n[loss]\n1: nobody\n", scenario("fivenode.zdps"))).unwrap();
    assert_eq!(zdps(&["run", bad_scn.to_str().unwrap()]).0, 2);
    std::fs::remove_file(bad_scn).unwrap();

    assert_eq!(zdps(&["run", "/nonexistent.scn"]).0, 2);
    assert_eq!(zdps(&["run", &scenario("fivenode.scn"), "--recover-at", "40"]).0, 2);
    assert_eq!(zdps(&["run", &scenario("fivenode.scn"), "--feed", "psychic"]).0, 2);

    let bad_src = temp("syntax.zdps");
    std::fs::write(&bad_src, "signal class { }").unwrap();
    let (code, _, err) = zdps(&["parse", bad_src.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("13"), "{err}");
    std::fs::remove_file(bad_src).unwrap();
}

#[test]
fn engine_errors_exit_three() {
    let src = std::fs::read_to_string(scenario("switch.zdps"))
        .unwrap()
        .replace("l5.setUpstreams(l3, new D2(\"l6\"));", "l5.setUpstreams(l3);");
    let path = temp("arity.zdps");
    std::fs::write(&path, src).unwrap();
    let (code, _, err) = zdps(&["run", path.to_str().unwrap(), "--prebuild", "--ticks", "3"]);
    std::fs::remove_file(path).unwrap();
    assert_eq!(code, 3);
    assert!(err.contains("upstream slots"), "{err}");
}
