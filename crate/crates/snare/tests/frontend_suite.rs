//! Frontend behavior: interleaving enumeration against a brute-force
//! shuffle filter, the bundled protocol corpus, and report shape.

use std::collections::BTreeSet;

use snare::frontend::compile::compile;
use snare::frontend::parse::parse;
use snare::{analyze_source, RunConfig, TermArena};

const TWO_SESSIONS: &str = r#"
agents { honest a }
roles {
  role R(self) {
    recv x
    recv y
  }
}
scenario {
  session s1: R(a)
  session s2: R(a)
}
property { secrecy a }
"#;

const THREE_SESSIONS: &str = r#"
agents { honest a }
roles {
  role R(self) {
    recv x
    recv y
  }
}
scenario {
  session s1: R(a)
  session s2: R(a)
  session s3: R(a)
}
property { secrecy a }
"#;

/// Order-preserving shuffles of the sessions' event labels, brute-forced
/// by filtering every permutation.
fn shuffles(sessions: &[&str], events: usize) -> BTreeSet<Vec<String>> {
    let labels: Vec<String> = sessions
        .iter()
        .flat_map(|s| (1..=events).map(move |i| format!("{s}.{i}")))
        .collect();
    let mut out = BTreeSet::new();
    let mut current = Vec::new();
    let mut used = vec![false; labels.len()];
    fn recurse(
        labels: &[String],
        used: &mut Vec<bool>,
        current: &mut Vec<String>,
        out: &mut BTreeSet<Vec<String>>,
    ) {
        if current.len() == labels.len() {
            out.insert(current.clone());
            return;
        }
        for i in 0..labels.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            current.push(labels[i].clone());
            recurse(labels, used, current, out);
            current.pop();
            used[i] = false;
        }
    }
    recurse(&labels, &mut used, &mut current, &mut out);
    out.retain(|order| {
        // within each session, step numbers must appear ascending
        order.iter().enumerate().all(|(i, label)| {
            let (session, step) = label.split_once('.').unwrap();
            let step: usize = step.parse().unwrap();
            step == 1
                || order[..i]
                    .iter()
                    .any(|prev| prev == &format!("{session}.{}", step - 1))
        })
    });
    out
}

fn compiled_orders(source: &str) -> BTreeSet<Vec<String>> {
    let file = parse(source).expect("parse");
    let arena = TermArena::new(file.profile);
    let compiled = compile(&arena, &file, 1000).expect("compile");
    assert!(!compiled.truncated);
    compiled.systems.iter().map(|s| s.order.clone()).collect()
}

#[test]
fn interleavings_are_exactly_the_order_preserving_shuffles() {
    let two = compiled_orders(TWO_SESSIONS);
    assert_eq!(two.len(), 6);
    assert_eq!(two, shuffles(&["s1", "s2"], 2));

    let three = compiled_orders(THREE_SESSIONS);
    assert_eq!(three.len(), 90);
    assert_eq!(three, shuffles(&["s1", "s2", "s3"], 2));
}

#[test]
fn the_interleaving_cap_truncates_and_reports_it() {
    let cfg = RunConfig { max_interleavings: 7, ..RunConfig::default() };
    let report = analyze_source(THREE_SESSIONS, &cfg).expect("analysis");
    assert!(report.truncated);
    assert_eq!(report.interleavings, 7);

    let report = analyze_source(THREE_SESSIONS, &RunConfig::default()).expect("analysis");
    assert!(!report.truncated);
    assert_eq!(report.interleavings, 90);
}

#[test]
fn a_schedule_fixes_a_single_interleaving() {
    let source = include_str!("../../../protocols/wmf_timed.snare");
    let file = parse(source).expect("parse");
    let arena = TermArena::new(file.profile);
    let compiled = compile(&arena, &file, 1000).expect("compile");
    assert_eq!(compiled.systems.len(), 1);
    assert_eq!(
        compiled.systems[0].order,
        vec!["serv1.1", "serv2.1", "serv3.1", "bob.1"]
    );
}

#[test]
fn the_bundled_corpus_analyzes_with_the_expected_verdicts() {
    let corpus: [(&str, &str, bool); 4] = [
        ("ns_secrecy", include_str!("../../../protocols/ns_secrecy.snare"), true),
        ("ns_agreement", include_str!("../../../protocols/ns_agreement.snare"), true),
        ("wmf_timed", include_str!("../../../protocols/wmf_timed.snare"), true),
        ("keycycle_demo", include_str!("../../../protocols/keycycle_demo.snare"), true),
    ];
    for (name, source, expect_attack) in corpus {
        let report = analyze_source(source, &RunConfig::default())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(report.attack_found, expect_attack, "{name}");
        if expect_attack {
            assert!(!report.attacks.is_empty(), "{name}: attack without witness");
        }
        let json: serde_json::Value = serde_json::from_str(&report.machine_readable())
            .unwrap_or_else(|e| panic!("{name}: bad JSON: {e}"));
        assert_eq!(json["attack_found"], serde_json::Value::Bool(expect_attack));
        assert!(!report.text().is_empty());
    }
}

#[test]
fn compilation_is_deterministic() {
    let source = include_str!("../../../protocols/ns_secrecy.snare");
    let orders1 = compiled_orders(source);
    let orders2 = compiled_orders(source);
    assert_eq!(orders1, orders2);

    let r1 = analyze_source(source, &RunConfig::default()).unwrap().machine_readable();
    let r2 = analyze_source(source, &RunConfig::default()).unwrap().machine_readable();
    assert_eq!(r1, r2);
}

#[test]
fn malformed_sources_are_rejected() {
    assert!(parse("roles {}").is_err());
    assert!(parse("agents { honest a").is_err());
    let bad_profile = TWO_SESSIONS.replace(
        "agents { honest a }",
        "sorts { profile warp } agents { honest a }",
    );
    assert!(parse(&bad_profile).is_err());
    let unknown_role = TWO_SESSIONS.replace("session s1: R(a)", "session s1: Q(a)");
    let file = parse(&unknown_role).expect("parses");
    let arena = TermArena::new(file.profile);
    assert!(compile(&arena, &file, 1000).is_err());
}
