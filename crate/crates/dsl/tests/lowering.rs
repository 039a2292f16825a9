use zdps_core::fixtures::{five_node_network, five_node_resolver};
use zdps_core::{Ident, Timestamp};
use zdps_dsl::{annotate_classes, compile, parse_program, DslError, TimingSpec};

const FIVE: &str = include_str!("../../cli/scenarios/fivenode.zdps");
const SWITCH: &str = include_str!("../../cli/scenarios/switch.zdps");
const MONITORING: &str = include_str!("../../cli/scenarios/monitoring.zdps");

#[test]
fn five_node_program_builds_the_fixture_network() {
    let l = compile(FIVE, 1).unwrap();
    let s = l.initial_state(true).unwrap();
    assert_eq!(s.t, 1);
    assert_eq!(s.phi.at(Timestamp::At(0)).unwrap(), &five_node_network());
    let want = five_node_resolver();
    for id in ["l1", "l2", "l3", "l4", "l5"] {
        let id = Ident::new(id);
        assert_eq!(l.mu.get(&id), want.get(&id), "resolver entry for {id}");
    }
    assert_eq!(l.mu.len(), 5);
}

#[test]
fn switching_program_reserves_the_late_source() {
    let l = compile(SWITCH, 1).unwrap();
    let l6 = Ident::new("l6");
    assert_eq!(l.mu.get(&l6), five_node_resolver().get(&l6));
}

#[test]
fn monitoring_program_timings() {
    let at = |tick| {
        let l = compile(MONITORING, tick).unwrap();
        ["Traffic", "Ping", "IDS", "Monitor"].map(|c| l.timings[c].tm)
    };
    assert_eq!(at(5), [1, 12, 1, 1]);
    assert_eq!(at(1), [5, 60, 1, 1]);
    let p = parse_program(MONITORING).unwrap();
    let annotated = annotate_classes(&p.classes, 5).unwrap();
    let monitor = annotated.iter().find(|c| c.name == "Monitor").unwrap();
    assert_eq!(monitor.timing, Some(TimingSpec::Anytime));
}

#[test]
fn printed_programs_parse_back() {
    for src in [FIVE, SWITCH, MONITORING] {
        let p = parse_program(src).unwrap();
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }
}

const SRC: &str = "signal class A { persistent signal a = 1; }\n\
                   signal class J { A x; A y; signal j = f(x.a, y.a); }\n";

#[test]
fn instance_errors() {
    let dup = format!("{SRC}main {{ new A(\"p\"); new A(\"p\"); }}");
    assert_eq!(compile(&dup, 1).unwrap_err(), DslError::DuplicateId("p".into()));

    let unknown = format!("{SRC}main {{ new Z(\"p\"); }}");
    assert_eq!(compile(&unknown, 1).unwrap_err(), DslError::UnknownClass("Z".into()));

    let arity = format!("{SRC}main {{ new J(\"j\", new A(\"p\")); }}");
    assert_eq!(
        compile(&arity, 1).unwrap_err(),
        DslError::ArityMismatch {
            class: "J".into(),
            expected: 2,
            found: 1
        }
    );

    let wrong = format!("{SRC}main {{ let p = new A(\"p\"); new J(\"j\", p, new J(\"k\", p, p)); }}");
    assert!(matches!(compile(&wrong, 1), Err(DslError::SlotClassMismatch { .. })));
}
