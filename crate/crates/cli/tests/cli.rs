use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name)
}

fn tm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(args)
        .env("TM_COLOR", "0")
        .output()
        .expect("spawn tm")
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn check_passes_both_fixtures() {
    for f in ["atm.tm", "ordering.tm"] {
        let out = tm(&["check", path(&corpus(f))]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stdout(&out).contains(": pass (0 error(s)"));
    }
}

#[test]
fn check_failure_exits_one_with_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        &dir,
        "bad.tm",
        "model Bad\nmachine A { thing X action c: create of X }\n",
    );
    let out = tm(&["check", "--json", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let lines: Vec<Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().any(|v| v["severity"] == "error"));
}

#[test]
fn parse_errors_exit_two_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "broken.tm", "model\n");
    let out = tm(&["check", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty());
    assert!(stderr(&out).contains("broken.tm"));
    let missing = tm(&["check", "/nonexistent/x.tm"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["frobnicate"][..], &["check", "--bogus", "x.tm"], &[]] {
        let out = tm(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains("Usage: tm"), "{args:?}");
        assert!(stdout(&out).is_empty());
    }
    let bad_view = tm(&["render", "--view=svg", "x.tm"]);
    assert_eq!(bad_view.status.code(), Some(2));
    assert!(stderr(&bad_view).contains("unknown view `svg`"));
    assert_eq!(tm(&["--help"]).status.code(), Some(0));
}

#[test]
fn simplify_then_elaborate_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = tm(&["simplify", path(&corpus("atm.tm"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("model ATM simplified"));
    let simple = write(&dir, "s.tm", &text);
    assert_eq!(tm(&["check", path(&simple)]).status.code(), Some(0));
    let again = tm(&["simplify", path(&simple)]);
    assert_eq!(stdout(&again), text);
    let elab = tm(&["elaborate", path(&simple)]);
    assert_eq!(elab.status.code(), Some(0), "{}", stderr(&elab));
    let full = write(&dir, "e.tm", &stdout(&elab));
    assert_eq!(tm(&["check", path(&full)]).status.code(), Some(0));
    let refuse = tm(&["elaborate", path(&corpus("atm.tm"))]);
    assert_eq!(refuse.status.code(), Some(1));
}

#[test]
fn json_models_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let m = tm_core::corpus::atm();
    let p = write(&dir, "atm.tm.json", &tm_core::to_json(&m));
    let out = tm(&["check", path(&p)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let bad = write(&dir, "bad.tm.json", "{\"name\": 3}");
    assert_eq!(tm(&["check", path(&bad)]).status.code(), Some(2));
}

#[test]
fn events_reports_regions_and_coverage() {
    let out = tm(&["events", path(&corpus("atm.tm")), path(&corpus("atm.ev"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with('E')).count(), 23);
    assert!(text.ends_with("coverage: complete (23 event(s))\n"));
    let ord = stdout(&tm(&[
        "events",
        path(&corpus("ordering.tm")),
        path(&corpus("ordering.ev")),
    ]));
    assert!(ord.contains("uncovered: Customer.OrderStructure.p_name"));
}

#[test]
fn behavior_diff_detects_tampering() {
    let ok = tm(&[
        "behavior",
        "--declared",
        path(&corpus("atm.tm")),
        path(&corpus("atm.ev")),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let text = tm_core::corpus::ATM_EV.replacen("  E1 -> E2\n", "  E1 -> E3\n", 1);
    assert_ne!(text, tm_core::corpus::ATM_EV);
    let ev = write(&dir, "t.ev", &text);
    let out = tm(&["behavior", "--declared", path(&corpus("atm.tm")), path(&ev)]);
    assert_eq!(out.status.code(), Some(1));
    let diff = stdout(&out);
    assert!(diff.contains("+ inferred only: E1 -> E2"));
    assert!(diff.contains("- declared only: E1 -> E3"));
}

#[test]
fn behavior_prints_a_reloadable_chronology() {
    let out = tm(&[
        "behavior",
        path(&corpus("ordering.tm")),
        path(&corpus("ordering.ev")),
    ]);
    let chron = stdout(&out);
    assert!(chron.contains("  E8 -> E5\n"));
    assert!(chron.contains("  E7 -> E8 [match=no]\n"));
}

#[test]
fn simulate_streams_the_trace() {
    let out = tm(&[
        "simulate",
        path(&corpus("atm.tm")),
        path(&corpus("atm.ev")),
        path(&corpus("atm_happy.scn")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let lines: Vec<Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 19);
    assert_eq!(lines[17]["event"], "E22");
    assert_eq!(lines[18]["terminal"], "completed");
}

#[test]
fn simulate_rejects_mismatched_or_incomplete_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let other = tm(&[
        "simulate",
        path(&corpus("atm.tm")),
        path(&corpus("atm.ev")),
        path(&corpus("ordering_retry.scn")),
    ]);
    assert_eq!(other.status.code(), Some(2));
    let partial = write(&dir, "p.scn", "scenario p on ATM\nbind card = valid\n");
    let out = tm(&[
        "simulate",
        path(&corpus("atm.tm")),
        path(&corpus("atm.ev")),
        path(&partial),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("does not bind"));
}

#[test]
fn import_sd_output_checks_and_carries_events() {
    let dir = tempfile::tempdir().unwrap();
    let out = tm(&["import-sd", path(&corpus("withdraw.sd"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model = write(&dir, "w.tm", &stdout(&out));
    assert_eq!(tm(&["check", path(&model)]).status.code(), Some(0));
    let ev = tm(&["import-sd", "--events", path(&corpus("withdraw.sd"))]);
    let evp = write(&dir, "w.ev", &stdout(&ev));
    let rep = tm(&["events", path(&model), path(&evp)]);
    assert_eq!(rep.status.code(), Some(0), "{}", stderr(&rep));
    assert_eq!(
        stdout(&rep).lines().filter(|l| l.starts_with('M')).count(),
        6
    );
    let sd = write(&dir, "bad.sd", "participant A\nA -> B: hi\n");
    assert_eq!(tm(&["import-sd", path(&sd)]).status.code(), Some(2));
}

#[test]
fn render_views_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let (m, ev) = (corpus("atm.tm"), corpus("atm.ev"));
    for view in ["static", "overlay", "behavior"] {
        let flag = format!("--view={view}");
        let out = tm(&["render", &flag, path(&m), path(&ev)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        tm_core::render::dot_check::parse(&stdout(&out)).unwrap();
    }
    let target = dir.path().join("atm.dot");
    let out = tm(&["render", "--labels", "-o", path(&target), path(&m)]);
    assert!(stdout(&out).is_empty());
    let dot = std::fs::read_to_string(&target).unwrap();
    assert!(dot.contains("\\n"));
    let simple = stdout(&tm(&[
        "render",
        "--simplified",
        "--view=overlay",
        path(&m),
        path(&ev),
    ]));
    assert!(simple.contains("label=\"ATM (simplified)\""));
    tm_core::render::dot_check::parse(&simple).unwrap();
    assert_eq!(
        tm(&["render", "--view=overlay", path(&m)]).status.code(),
        Some(2)
    );
    let red = stdout(&tm(&[
        "render",
        "--view=overlay",
        "--palette",
        "red,blue",
        path(&m),
        path(&ev),
    ]));
    assert!(red.contains("fillcolor=\"red\""));
    assert!(!red.contains("lightblue"));
}

#[test]
fn tm_color_toggles_ansi() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        &dir,
        "bad.tm",
        "model Bad\nmachine A { thing X action c: create of X }\n",
    );
    let colored = Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(["check", path(&bad)])
        .env("TM_COLOR", "1")
        .output()
        .unwrap();
    assert!(stdout(&colored).contains("\x1b["));
    assert!(!stdout(&tm(&["check", path(&bad)])).contains("\x1b["));
}
