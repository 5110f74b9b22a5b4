use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn aspax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aspax")).args(args).env_remove("ASPAX_LIMITS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_with_inline_facts() {
    let o = aspax(&["solve", &data("pairs.lp"), "--facts", "c(1). b(2)."]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Answer 1: {a(1,2), b(2), c(1), d(1,2)}\n");
}

#[test]
fn solve_with_facts_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("inst.lp");
    std::fs::write(&f, "c(2). b(2).").unwrap();
    let o = aspax(&["solve", "--program", &data("pairs.lp"), "--facts", f.to_str().unwrap()]);
    assert_eq!(stdout(&o), "Answer 1: {a(2,2), b(2), c(2), d(2,2)}\n");
}

#[test]
fn empty_program_has_one_empty_answer_set() {
    let o = aspax(&["solve", &data("empty.lp")]);
    assert_eq!(stdout(&o), "Answer 1: {}\n");
}

#[test]
fn check_omission_is_sound() {
    let o = aspax(&["check", &data("pairs.lp"), "--map", &data("omit_c.map"), "--facts", "b(2)."]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("uncovered: 0"));
}

#[test]
fn check_domain_abstraction_json() {
    let o = aspax(&[
        "check",
        &data("pairs_neg.lp"),
        "--map",
        &data("one_vs_rest.map"),
        "--facts",
        "c(3). b(2).",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sound"], true);
    assert_eq!(v["concrete"], 1);
}

#[test]
fn shrunk_constraint_exits_violated() {
    let o = aspax(&["check", &data("shrink.lp"), "--map", &data("omit_c0.map"), "--shrink-constraints"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("uncovered: 1"));
}

#[test]
fn usage_and_io_errors_exit_2() {
    assert_eq!(aspax(&["solve", "/nonexistent/x.lp"]).status.code(), Some(2));
    assert_eq!(aspax(&["frobnicate"]).status.code(), Some(2));
    let o = aspax(&["solve", &data("pairs.lp"), "--facts", "c(1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn resource_limits_exit_3() {
    let o = aspax(&["solve", &data("pairs_neg.lp"), "--max-ground", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_aspax"))
        .args(["solve", &data("pairs_neg.lp")])
        .env("ASPAX_LIMITS", "ground=2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn abstract_and_omit_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.lp");
    let o =
        aspax(&["abstract", &data("pairs_neg.lp"), "--map", &data("one_vs_rest.map"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("aux_neg_a(V1,V2) :- dom_s(V1), dom_s(V2), not a(V1,V2)."), "{text}");
    // the output is itself a program
    assert_eq!(aspax(&["parse", out.to_str().unwrap()]).status.code(), Some(0));

    let o = aspax(&["omit", &data("pairs.lp"), "--map", &data("omit_c.map")]);
    assert!(stdout(&o).contains("0 { a(X1,X2) } 1 :- b(X2), dom_s(X1)."), "{}", stdout(&o));
}

#[test]
fn grid_policy_check_reports_spurious() {
    let dir = tempfile::tempdir().unwrap();
    let d = |f: &str| dir.path().join(f).display().to_string();
    assert_eq!(aspax(&["grid", "--out", dir.path().to_str().unwrap()]).status.code(), Some(0));
    let pattern = std::fs::read_to_string(d("pattern.txt")).unwrap();
    let args = |map: &str| {
        aspax(&[
            "policy-check",
            "--domain",
            &d("domain.lp"),
            "--policy",
            &d("policy.lp"),
            "--map",
            &d(map),
            "--goal",
            "caught",
            "--bound",
            "3",
            "--pattern",
            pattern.trim(),
            "--format",
            "json",
        ])
    };
    let o = args("coarse.map");
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["spurious"]["step"], 2);
    assert_eq!(v["verdict"]["spurious"]["kind"], "no-plan");
    let v: serde_json::Value = serde_json::from_slice(&args("refined.map").stdout).unwrap();
    assert!(v["counterexample"].is_null());
}

#[test]
fn output_is_deterministic() {
    let run = || stdout(&aspax(&["gen", "--seed", "7"]));
    assert_eq!(run(), run());
    assert_ne!(run(), stdout(&aspax(&["gen", "--seed", "8"])));
    let run =
        || aspax(&["check", &data("pairs_neg.lp"), "--map", &data("one_vs_rest.map"), "--facts", "c(2). b(3)."]).stdout;
    assert_eq!(run(), run());
}
