//! End-to-end coverage of the command-line interface.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_firstify"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn check_accepts_the_sample_program() {
    let out = bin().arg("check").arg(fixture("winnow.hl")).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "ok: 7 clauses, 4 predicates\n");
}

#[test]
fn check_rejects_free_body_predicate_variables() {
    let out = bin().arg("check").arg(fixture("nondef.hl")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("free predicate variable"), "{err}");
    assert!(err.contains("nondef.hl:1"), "{err}");
}

#[test]
fn firstify_prints_the_rename_table_and_writes_prolog() {
    let dir = tempfile::tempdir().unwrap();
    let outfile = dir.path().join("winnow.pl");
    let out = bin()
        .arg("firstify")
        .arg(fixture("winnow.hl"))
        .args(["--query", "winnow(pref, movie, T)"])
        .arg("-o")
        .arg(&outfile)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("winnow(pref,movie,T) -> winnow_s1(T)"), "{text}");
    assert!(text.contains("winnow(pref,movie,V1) -> winnow_s1(V1)"), "{text}");

    let pl = std::fs::read_to_string(&outfile).unwrap();
    assert!(pl.contains("winnow_s1(V1) :- movie(V1), \\+ bypassed_s1(V1)."), "{pl}");
    assert!(pl.contains("bypassed_s1(V1) :- movie(Z), pref(Z,V1)."), "{pl}");
    assert!(pl.contains("% source-sha256: "), "{pl}");
}

#[test]
fn firstify_is_deterministic() {
    let run = || {
        let out = bin()
            .arg("firstify")
            .arg(fixture("conj23.hl"))
            .args(["--query", "conj3(p,q,r,X)"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        out.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn firstify_with_driver_emits_a_main_clause() {
    let dir = tempfile::tempdir().unwrap();
    let outfile = dir.path().join("driver.pl");
    let out = bin()
        .arg("firstify")
        .arg(fixture("winnow.hl"))
        .args(["--query", "winnow(pref, movie, T)"])
        .arg("--driver")
        .arg("-o")
        .arg(&outfile)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let pl = std::fs::read_to_string(&outfile).unwrap();
    assert!(pl.contains(":- initialization(main, main)."), "{pl}");
    assert!(pl.contains("main :-"), "{pl}");
}

#[test]
fn defun_emits_apply_clauses() {
    let out = bin()
        .arg("defun")
        .arg(fixture("winnow.hl"))
        .args(["--query", "winnow(pref, movie, T)"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("apply_1(F,X1) :- F = movie, movie(X1)."), "{text}");
    assert!(text.contains("winnow(pref,movie,T) -> winnow(pref,movie,T)"), "{text}");
}

#[test]
fn solve_prints_answers_one_per_line() {
    let out = bin()
        .arg("solve")
        .arg(fixture("conj23.hl"))
        .args(["--query", "conj3(p,q,r,X)"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "X = b\n");
}

#[test]
fn solve_reports_stats_on_stderr() {
    let out = bin()
        .arg("solve")
        .arg(fixture("winnow.hl"))
        .args(["--query", "winnow(pref, movie, T)", "--stats"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out), "T = m1\n");
    let err = stderr(&out);
    assert!(err.contains("answers=1"), "{err}");
    assert!(err.contains("steps="), "{err}");
}

#[test]
fn equiv_reports_equal_answer_sets() {
    for baseline in ["specialized", "reynolds"] {
        let out = bin()
            .arg("equiv")
            .arg(fixture("winnow.hl"))
            .args(["--query", "winnow(pref, movie, T)", "--baseline", baseline])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.starts_with("result=equal "), "{baseline}: {text}");
    }
}

#[test]
fn bench_prints_csv_rows() {
    let out = bin()
        .args(["bench", "--family", "closure", "--n", "10", "--mode", "specialized"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,n,mode,clauses,steps,transform_ms"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("closure,10,specialized,3,"), "{row}");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().arg("firstify").arg(fixture("winnow.hl")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing --query must be a usage error");
}

#[test]
fn pipeline_errors_exit_with_one() {
    let out = bin()
        .arg("firstify")
        .arg(fixture("nondef.hl"))
        .args(["--query", "q(X)"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error: "), "{}", stderr(&out));

    let out = bin().arg("check").arg("no-such-file.hl").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
